// fcmad: data generation, training, evaluation and self-checks.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric error.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fcmad/checkpoint.hpp"
#include "fcmad/config.hpp"
#include "fcmad/dataset.hpp"
#include "fcmad/datamine.hpp"
#include "fcmad/evalbench.hpp"
#include "fcmad/experiment.hpp"
#include "fcmad/manifest.hpp"
#include "fcmad/selftest.hpp"
#include "fcmad/trainer.hpp"

namespace fs = std::filesystem;
using namespace fcmad;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Config:
    case ErrorKind::Misuse:
      return kExitUsage;
    case ErrorKind::Numeric:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

/// `--key value` / `--key=value` pairs left over by the option parser.
/// Repeated `--delta` flags accumulate into one list.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& extras) {
  std::vector<std::string> deltas;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + arg + "'");
    std::string key = arg.substr(2), value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("option --" + key + " needs a value");
      value = extras[++i];
    }
    if (!RunConfig::known(key)) throw ConfigError("unknown option --" + key + " (see --help)");
    if (key == "delta") {
      deltas.push_back(value);
    } else {
      cfg.set(key, value);
    }
  }
  if (!deltas.empty()) {
    std::string joined;
    for (const auto& d : deltas) joined += (joined.empty() ? "" : ",") + d;
    cfg.set("delta", joined);
  }
}

struct Command {
  CLI::App* app = nullptr;
  std::string config_file;
};

RunConfig resolve(const Command& cmd) {
  RunConfig cfg;
  if (!cmd.config_file.empty()) cfg.load(fs::path(cmd.config_file));
  apply_overrides(cfg, cmd.app->remaining());
  return cfg;
}

fs::path ensure_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
  return p;
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  fn(out);
  if (!out) throw IoError("failed writing " + path.string());
}

fs::path landmark_path(const fs::path& image) {
  fs::path p = image;
  p.replace_extension(".lm");
  return p;
}

void save_sample(const fs::path& root, const LabeledSample& s) {
  const fs::path image = root / s.path;
  ensure_dir(image.parent_path().string());
  write_pgm(image, s.face.image);
  write_landmarks(landmark_path(image), s.face.landmarks);
}

LabeledSample load_sample(const fs::path& root, const ManifestRecord& r, bool with_landmarks) {
  LabeledSample s;
  s.path = r.path;
  s.kind = r.kind;
  s.labels = {r.id_first, r.id_second};
  const fs::path image = root / r.path;
  s.face.image = read_pgm(image);
  if (with_landmarks) s.face.landmarks = read_landmarks(landmark_path(image));
  s.face.identity_id = r.id_first;
  s.face.second_identity_id = r.id_second;
  return s;
}

SplitPlan read_split_file(const fs::path& dir, const std::string& name) {
  return read_split(dir / name);
}

/// The configuration gen-data ran with; later stages take the generator
/// settings from it so every stage sees the same identities.
RunConfig dataset_config(const fs::path& dir) {
  const fs::path p = dir / "gen-data.cfg";
  if (!fs::exists(p)) throw IoError("missing " + p.string() + " (run gen-data first)");
  RunConfig cfg;
  cfg.load(p);
  return cfg;
}

std::vector<ManifestRecord> read_all_records(const fs::path& dir, bool require_morphs) {
  auto records = read_manifest(dir / "dataset.tsv");
  const fs::path morphs = dir / "morphs.tsv";
  if (fs::exists(morphs)) {
    auto m = read_manifest(morphs);
    records.insert(records.end(), m.begin(), m.end());
  } else if (require_morphs) {
    throw IoError("missing manifest " + morphs.string() + " (run gen-morphs first)");
  }
  return records;
}

std::size_t identity_count(const std::vector<ManifestRecord>& records) {
  std::size_t n = 0;
  for (const auto& r : records) n = std::max({n, r.id_first + 1, r.id_second + 1});
  return n;
}

bool in_plan(const SplitPlan& plan, const ManifestRecord& r) {
  return plan.subset_of(r.id_first).has_value() && plan.subset_of(r.id_second).has_value();
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const RunConfig& cfg) {
  const fs::path dir = ensure_dir(cfg.get("data_dir"));
  const FaceSynth synth(derive_seed(cfg.seed(), "synth"), cfg.synth());
  std::vector<std::size_t> ids(cfg.count("identities"));
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const auto split = split_identities(ids, derive_seed(cfg.seed(), "split"));
  const double holdout = cfg.number("holdout_fraction");
  const auto partition = hold_out(split, holdout, derive_seed(cfg.seed(), "holdout"));

  const auto bona = generate_bona_fides(synth, ids, cfg.count("images_per_identity"));
  std::vector<ManifestRecord> records;
  for (const auto& s : bona) {
    save_sample(dir, s);
    records.push_back(to_record(s));
  }
  write_file(dir / "dataset.tsv", [&](std::ostream& o) { write_dataset_manifest(o, records); });
  write_file(dir / "split.tsv", [&](std::ostream& o) { write_split(o, partition.train); });
  write_file(dir / "holdout.tsv", [&](std::ostream& o) { write_split(o, partition.validation); });
  cfg.write(dir / "gen-data.cfg");
  std::cout << "gen-data: " << records.size() << " bona fide images of " << ids.size() << " identities in "
            << dir.string() << " (" << partition.validation.all().size() << " identities held out)\n";
  return 0;
}

int cmd_gen_morphs(const RunConfig& cfg) {
  const fs::path dir(cfg.get("data_dir"));
  const auto records = read_manifest(dir / "dataset.tsv");
  const RunConfig data_cfg = dataset_config(dir);
  const FaceSynth synth(derive_seed(data_cfg.seed(), "synth"), data_cfg.synth());
  const auto train_plan = read_split_file(dir, "split.tsv");
  const auto eval_plan = read_split_file(dir, "holdout.tsv");
  const MorphConfig morph = cfg.morph();

  std::vector<LabeledSample> train_bona, eval_bona;
  for (const auto& r : records) {
    if (r.kind != SampleKind::BonaFide) continue;
    if (in_plan(train_plan, r)) train_bona.push_back(load_sample(dir, r, true));
    if (in_plan(eval_plan, r)) eval_bona.push_back(load_sample(dir, r, true));
  }
  if (train_bona.empty()) throw CoverageError("gen-morphs: no bona fide images for training identities");

  auto scaled = [](double ratio, std::size_t n) {
    if (!(ratio >= 0.0)) throw ConfigError("morph ratios must be >= 0");
    return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  };
  std::vector<ManifestRecord> out;
  std::map<std::string, std::size_t> counts;
  for (const MorphFamily family : cfg.families("family")) {
    auto batch = generate_family(synth, train_bona, train_plan, family,
                                 scaled(cfg.number("selfmorph_ratio"), train_bona.size()),
                                 scaled(cfg.number("morph_ratio"), train_bona.size()), morph,
                                 derive_seed(cfg.seed(), "train-morphs"));
    if (!eval_bona.empty()) {
      auto held = generate_family(synth, eval_bona, eval_plan, family, 0,
                                  scaled(cfg.number("eval_morph_ratio"), eval_bona.size()), morph,
                                  derive_seed(cfg.seed(), "eval-morphs"), "val");
      batch.insert(batch.end(), held.begin(), held.end());
    }
    for (const auto& s : batch) {
      save_sample(dir, s);
      out.push_back(to_record(s));
      ++counts[to_string(s.kind)];
    }
  }
  write_file(dir / "morphs.tsv", [&](std::ostream& o) { write_morph_manifest(o, out); });
  cfg.write(dir / "gen-morphs.cfg");
  std::cout << "gen-morphs:";
  for (const auto& [kind, n] : counts) std::cout << ' ' << kind << '=' << n;
  std::cout << '\n';
  return 0;
}

int cmd_gen_protocol(const RunConfig& cfg) {
  const fs::path dir(cfg.get("data_dir"));
  const auto records = read_all_records(dir, true);
  const auto eval_plan = read_split_file(dir, "holdout.tsv");
  std::vector<ManifestRecord> held;
  for (const auto& r : records) {
    if (in_plan(eval_plan, r)) held.push_back(r);
  }
  const auto families = cfg.families("protocol_family");
  if (families.size() != 1) throw ConfigError("protocol_family must name one family");
  std::vector<std::string> warnings;
  const auto protocol =
      generate_protocol(held, families[0], derive_seed(cfg.seed(), "protocol"), cfg.protocol_options(), &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  const fs::path out = dir / ("protocol-" + to_string(families[0]) + ".tsv");
  write_file(out, [&](std::ostream& o) { write_protocol(o, protocol); });
  std::size_t morphs = 0;
  for (const auto& e : protocol) morphs += e.truth == GroundTruth::Morph;
  std::cout << "gen-protocol: " << out.string() << " with " << protocol.size() - morphs << " bona fide and "
            << morphs << " morph pairs\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const fs::path dir(cfg.get("data_dir"));
  const fs::path out = ensure_dir(cfg.get("out_dir"));
  const auto records = read_all_records(dir, cfg.get("variant") != "fr");
  const auto plan = read_split_file(dir, "split.tsv");
  const auto families = cfg.families("train_family");
  auto wanted = [&](SampleKind k) {
    return k == SampleKind::BonaFide ||
           std::find(families.begin(), families.end(), family_of(k)) != families.end();
  };
  std::vector<LabeledSample> bona, self, morphs;
  for (const auto& r : records) {
    if (!in_plan(plan, r) || !wanted(r.kind)) continue;
    auto s = load_sample(dir, r, false);
    (r.kind == SampleKind::BonaFide ? bona : is_morph(r.kind) ? morphs : self).push_back(std::move(s));
  }
  const std::size_t num_ids = identity_count(records);
  const ModelConfig model_cfg = cfg.model(num_ids);
  const SgdConfig sgd = cfg.sgd();
  cfg.write(out / "train.cfg");

  if (cfg.get("variant") == "fr") {
    Corpus corpus = bona;
    corpus.insert(corpus.end(), self.begin(), self.end());
    const auto fr = train_fr_model(corpus, model_cfg, sgd, derive_seed(cfg.seed(), "fr"));
    save_checkpoint(out / "model.ckpt", AnyModel(fr));
    std::cout << "train: FR model on " << corpus.size() << " images -> " << (out / "model.ckpt").string() << '\n';
    return 0;
  }

  const Variant variant = variant_from_string(cfg.get("variant"));
  const Corpus corpus = assemble_dataset(bona, self, morphs, derive_seed(cfg.seed(), "assemble"));
  validate_corpus(corpus, plan);
  TrainOptions options;
  options.weights = cfg.weights();
  const std::size_t every = cfg.count("log_every");
  if (every > 0) {
    options.on_step = [every](const StepRecord& r, std::size_t total) {
      if (r.step % every == 0 || r.step + 1 == total) {
        std::fprintf(stderr, "step %zu/%zu lr %.6f l1 %.4f l2 %.4f l3 %.4f total %.4f\n", r.step + 1, total, r.lr,
                     r.l1, r.l2, r.l3, r.total);
      }
    };
  }
  auto result = train(corpus, model_cfg, sgd, variant, derive_seed(cfg.seed(), "train"), options);
  result.report.checkpoint = (out / "model.ckpt").string();
  result.report.config = cfg.entries();
  save_checkpoint(out / "model.ckpt", AnyModel(result.model));
  write_file(out / "train_report.csv", [&](std::ostream& o) { o << result.report.to_csv(); });
  std::cout << "train: " << to_string(variant) << ", " << result.report.steps.size() << " steps on "
            << corpus.size() << " samples -> " << result.report.checkpoint << '\n';
  return 0;
}

ImageLoader disk_loader(const fs::path& root) {
  return [root](const std::string& path) { return read_pgm(root / path); };
}

Protocol load_protocol(const RunConfig& cfg) {
  const std::string path = cfg.get("protocol");
  if (path.empty()) throw ConfigError("no protocol given (--protocol FILE)");
  std::ifstream in(path);
  if (!in) throw IoError("missing protocol " + path);
  return read_protocol(in);
}

void write_metrics(std::ostream& out, const std::vector<std::pair<std::string, std::vector<ScoredEntry>>>& runs,
                   const std::vector<double>& deltas) {
  out << "method,delta,apcer,threshold\n";
  for (const auto& [name, scores] : runs) {
    std::vector<double> s;
    std::vector<GroundTruth> t;
    for (const auto& e : scores) {
      s.push_back(e.score);
      t.push_back(e.truth);
    }
    for (double d : deltas) {
      const auto op = apcer_at_bpcer(s, t, d);
      out << name << ',' << format_exact(d) << ',' << format_exact(op.apcer) << ',' << format_threshold(op.threshold)
          << '\n';
    }
  }
}

DetCurve curve_of(const std::vector<ScoredEntry>& scores) {
  std::vector<double> s;
  std::vector<GroundTruth> t;
  for (const auto& e : scores) {
    s.push_back(e.score);
    t.push_back(e.truth);
  }
  return det_curve(s, t);
}

int cmd_eval(const RunConfig& cfg) {
  const fs::path dir(cfg.get("data_dir"));
  const fs::path out = ensure_dir(cfg.get("out_dir"));
  if (cfg.get("checkpoint").empty()) throw ConfigError("no checkpoint given (--checkpoint FILE)");
  const DualModel model = load_dual_checkpoint(cfg.get("checkpoint"));
  const Protocol protocol = load_protocol(cfg);
  const auto deltas = cfg.deltas();
  cfg.write(out / "eval.cfg");

  const auto loader = disk_loader(dir);
  const ScoreResult scored = score_protocol(model, protocol, loader);
  std::vector<std::pair<std::string, std::vector<ScoredEntry>>> runs{{to_string(model.variant), scored.scores}};
  std::vector<std::pair<std::string, std::string>> failures = scored.failures;
  write_file(out / "scores.tsv", [&](std::ostream& o) { write_scores(o, scored.scores); });

  if (!cfg.get("fr_checkpoint").empty()) {
    const FrModel fr = load_fr_checkpoint(cfg.get("fr_checkpoint"));
    const auto sims = similarity_protocol(fr, protocol, loader);
    if (sims.failures.empty() && scored.failures.empty()) {
      const auto fused = fuse_scores(scored.scores, sims.scores, cfg.fusion());
      runs.emplace_back(to_string(model.variant) + "+fr-" + to_string(cfg.fusion()), fused);
      write_file(out / "scores_fused.tsv", [&](std::ostream& o) { write_scores(o, fused); });
    }
  }
  if (!failures.empty()) {
    write_file(out / "failures.tsv", [&](std::ostream& o) {
      for (const auto& [id, why] : failures) o << id << '\t' << why << '\n';
    });
    std::cerr << "eval: " << failures.size() << " protocol entries could not be scored (see "
              << (out / "failures.tsv").string() << ")\n";
  }
  if (scored.scores.empty()) throw MetricError("eval: no entries scored");

  std::ostringstream metrics;
  write_metrics(metrics, runs, deltas);
  write_file(out / "metrics.csv", [&](std::ostream& o) { o << metrics.str(); });
  std::vector<std::pair<std::string, DetCurve>> curves;
  for (const auto& [name, scores] : runs) curves.emplace_back(name, curve_of(scores));
  write_file(out / "det.csv", [&](std::ostream& o) { write_det_csv(o, curves.front().second); });
  if (curves.size() > 1) write_file(out / "det_fused.csv", [&](std::ostream& o) { write_det_csv(o, curves[1].second); });
  write_file(out / "det.svg", [&](std::ostream& o) { write_det_svg(o, curves); });
  std::cout << metrics.str();
  std::cout << "excluded: " << failures.size() << '\n';
  return failures.empty() ? 0 : kExitData;
}

int cmd_compare(const RunConfig& cfg, const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw ConfigError("compare: give score files with --run NAME=PATH");
  const fs::path out = ensure_dir(cfg.get("out_dir"));
  const Protocol protocol = load_protocol(cfg);
  std::vector<NamedScores> runs;
  for (const auto& spec : inputs) {
    const auto eq = spec.find('=');
    const std::string name = eq == std::string::npos ? fs::path(spec).parent_path().filename().string() : spec.substr(0, eq);
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    std::ifstream in(path);
    if (!in) throw IoError("missing scores file " + path);
    runs.push_back({name.empty() ? path : name, read_scores(in)});
  }
  const auto cmp = compare_runs(runs, protocol, fs::path(cfg.get("protocol")).stem().string(), cfg.deltas());
  cfg.write(out / "compare.cfg");
  write_file(out / "comparison.csv", [&](std::ostream& o) { o << cmp.to_csv(); });
  write_file(out / "comparison_wide.csv", [&](std::ostream& o) { o << cmp.to_wide_csv(); });
  write_file(out / "det.svg", [&](std::ostream& o) { write_det_svg(o, cmp.curves); });
  std::cout << cmp.to_wide_csv();
  return 0;
}

int cmd_selftest(const RunConfig& cfg, bool corrupt) {
  bool ok = true;
  double worst = 0.0;
  for (Variant v : {Variant::BC, Variant::FC_V1, Variant::FC_V2}) {
    const auto r = fused_gradient_check(v, derive_seed(cfg.seed(), "selftest", static_cast<std::size_t>(v)), {},
                                        corrupt);
    const bool pass = r.max_rel_error < 1e-4;
    ok = ok && pass;
    worst = std::max(worst, r.max_rel_error);
    std::printf("gradient %-6s params %4zu max rel err %.3e %s\n", to_string(v).c_str(), r.parameters,
                r.max_rel_error, pass ? "ok" : "FAIL");
  }
  std::printf("gradient max rel err %.3e\n", worst);

  const double c10 = softmax_cross_entropy(Vector(10, 0.0), 3).loss;
  const bool ce_ok = std::abs(c10 - std::log(10.0)) <= 1e-12;
  const bool l3_ok = std::abs(binary_pair_loss(0.0, 0) - std::log(2.0)) <= 1e-12;
  std::printf("loss identities: uniform CE %s, l3(0) %s\n", ce_ok ? "ok" : "FAIL", l3_ok ? "ok" : "FAIL");
  ok = ok && ce_ok && l3_ok;

  const auto m = metric_oracle_check(200, derive_seed(cfg.seed(), "selftest-metrics"));
  std::printf("metric oracle: %zu/%zu sets agree %s\n", m.sets - m.mismatches, m.sets, m.mismatches ? "FAIL" : "ok");
  ok = ok && m.mismatches == 0;
  std::printf("selftest %s\n", ok ? "passed" : "FAILED");
  return ok ? 0 : kExitNumeric;
}

int cmd_desk(const RunConfig& cfg) {
  const fs::path out = ensure_dir(cfg.get("out_dir"));
  DeskConfig desk;
  desk.seed = cfg.seed();
  desk.identities = cfg.count("identities");
  desk.images_per_identity = cfg.count("images_per_identity");
  desk.synth = cfg.synth();
  desk.morph = cfg.morph();
  desk.holdout_fraction = cfg.number("holdout_fraction");
  const auto train_families = cfg.families("train_family");
  const auto eval_families = cfg.families("protocol_family");
  if (train_families.size() != 1 || eval_families.size() != 1) {
    throw ConfigError("desk: train_family and protocol_family must each name one family");
  }
  desk.train_family = train_families[0];
  desk.eval_family = eval_families[0];
  desk.model = cfg.model(desk.identities);
  desk.sgd = cfg.sgd();
  desk.protocol = cfg.protocol_options();
  cfg.write(out / "desk.cfg");

  const DeskData data = build_desk_data(desk);
  std::cerr << "desk: corpus " << data.corpus.size() << ", protocol " << data.protocol.size() << " pairs\n";
  const FrModel fr = train_desk_fr(desk, data);
  const auto sims = desk_similarities(fr, data);
  const auto deltas = cfg.deltas();
  std::vector<std::pair<std::string, std::vector<ScoredEntry>>> runs;
  std::ostringstream sep;
  sep << "method,separation_first,separation_second\n";
  for (Variant v : {Variant::BC, Variant::FC_V1, Variant::FC_V2}) {
    TrainOptions options;
    options.weights = cfg.weights();
    const auto o = run_variant(desk, data, v, options);
    runs.emplace_back(to_string(v), o.scores);
    runs.emplace_back(to_string(v) + "+fr-" + to_string(cfg.fusion()), fuse_scores(o.scores, sims, cfg.fusion()));
    auto fmt = [](const std::optional<double>& x) { return x ? format_exact(*x) : std::string("degenerate"); };
    sep << to_string(v) << ',' << fmt(o.separation.first) << ',' << fmt(o.separation.second) << '\n';
    std::cerr << "desk: " << to_string(v) << " done\n";
  }
  std::ostringstream metrics;
  write_metrics(metrics, runs, deltas);
  write_file(out / "desk_metrics.csv", [&](std::ostream& o) { o << metrics.str(); });
  write_file(out / "desk_separation.csv", [&](std::ostream& o) { o << sep.str(); });
  std::cout << metrics.str() << sep.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fused-classification differential morphing attack detection at desk scale"};
  app.require_subcommand(1);
  app.footer(config_help());

  std::map<std::string, Command> cmds;
  auto add = [&](const std::string& name, const std::string& desc) -> Command& {
    Command& c = cmds[name];
    c.app = app.add_subcommand(name, desc);
    c.app->allow_extras();
    c.app->add_option("--config", c.config_file, "config file with `key = value` lines");
    c.app->footer(config_help());
    return c;
  };
  add("gen-data", "render bona fide images, manifest and identity split");
  add("gen-morphs", "render selfmorphs and morphs for the generated dataset");
  add("gen-protocol", "build a differential protocol over held-out identities");
  add("train", "train a dual-network detector (bc, fc-v1, fc-v2) or an FR model (fr)");
  add("eval", "score a protocol; write scores, metrics and DET curves");
  Command& compare = add("compare", "compare score files on one protocol");
  std::vector<std::string> compare_inputs;
  compare.app->add_option("--run", compare_inputs, "score file as NAME=PATH (repeatable)")->take_all();
  Command& selftest = add("selftest", "gradient checks and metric oracles");
  bool corrupt = false;
  selftest.app->add_flag("--corrupt-gradient", corrupt, "double one analytic gradient coordinate");
  add("desk", "in-memory benchmark: BC, FC-V1, FC-V2 and FR fusion on a held-out family");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  for (auto& [name, cmd] : cmds) {
    if (!cmd.app->parsed()) continue;
    try {
      const RunConfig cfg = resolve(cmd);
      if (name == "gen-data") return cmd_gen_data(cfg);
      if (name == "gen-morphs") return cmd_gen_morphs(cfg);
      if (name == "gen-protocol") return cmd_gen_protocol(cfg);
      if (name == "train") return cmd_train(cfg);
      if (name == "eval") return cmd_eval(cfg);
      if (name == "compare") return cmd_compare(cfg, compare_inputs);
      if (name == "selftest") return cmd_selftest(cfg, corrupt);
      if (name == "desk") return cmd_desk(cfg);
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return exit_code(e);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitData;
    }
  }
  return kExitUsage;
}
