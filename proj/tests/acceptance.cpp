// Acceptance run: one PASS/FAIL line per criterion. The benchmark criteria
// (AC6-AC8) use the median over seeds 1, 2, 3.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fcmad/checkpoint.hpp"
#include "fcmad/experiment.hpp"
#include "fcmad/selftest.hpp"

using namespace fcmad;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// ---------------------------------------------------------------------------
// Brute-force metric oracle: every quantity recomputed by counting over all
// scores for every candidate threshold.

struct Counted {
  double apcer;
  double bpcer;
};

Counted counted(const std::vector<double>& s, const std::vector<GroundTruth>& t, double tau) {
  std::size_t morph = 0, bona = 0, miss = 0, reject = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (t[i] == GroundTruth::Morph) {
      ++morph;
      if (!(s[i] >= tau)) ++miss;
    } else {
      ++bona;
      if (s[i] >= tau) ++reject;
    }
  }
  return {double(miss) / double(morph), double(reject) / double(bona)};
}

std::vector<double> candidates(const std::vector<double>& s) {
  std::vector<double> c;
  for (double x : s) {
    if (std::find(c.begin(), c.end(), x) == c.end()) c.push_back(x);
  }
  c.push_back(std::numeric_limits<double>::infinity());
  return c;
}

bool metric_set_agrees(Rng& rng) {
  const std::size_t n = 2 + uniform_index(rng, 499);
  std::vector<double> s(n);
  std::vector<GroundTruth> t(n);
  const double grid = 5.0 + double(uniform_index(rng, 200));
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = std::floor(uniform01(rng) * grid) / grid;
    t[i] = uniform01(rng) < 0.4 ? GroundTruth::BonaFide : GroundTruth::Morph;
  }
  t[0] = GroundTruth::BonaFide;
  t[1] = GroundTruth::Morph;

  for (int k = 0; k < 5; ++k) {
    const double tau = k < 3 ? s[uniform_index(rng, n)] : uniform(rng, -0.5, 1.5);
    const auto got = apcer_bpcer(s, t, tau);
    const auto want = counted(s, t, tau);
    if (got.apcer != want.apcer || got.bpcer != want.bpcer) return false;
  }
  const auto cands = candidates(s);
  for (double delta : {0.001, 0.01, 0.05, 0.1, 0.25, 0.5, 0.9}) {
    double best = std::numeric_limits<double>::infinity();
    for (double c : cands) {
      if (counted(s, t, c).bpcer <= delta && c < best) best = c;
    }
    const auto want = counted(s, t, best);
    const auto got = apcer_at_bpcer(s, t, delta);
    if (got.threshold != best || got.apcer != want.apcer || got.bpcer != want.bpcer) return false;
  }
  const auto det = det_curve(s, t);
  auto sorted = cands;
  std::sort(sorted.begin(), sorted.end());
  if (det.size() != sorted.size()) return false;
  for (std::size_t i = 0; i < det.size(); ++i) {
    const auto want = counted(s, t, sorted[i]);
    if (det[i].threshold != sorted[i] || det[i].apcer != want.apcer || det[i].bpcer != want.bpcer) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

void ac1() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t params = 0;
  for (Variant v : {Variant::BC, Variant::FC_V1, Variant::FC_V2}) {
    const auto r = fused_gradient_check(v, derive_seed(1, "ac1", static_cast<std::size_t>(v)));
    worst = std::max(worst, r.max_rel_error);
    params = std::max(params, r.parameters);
  }
  const double secs = seconds_since(t0);
  report("AC1", worst < 1e-4 && params <= 2000 && secs < 30.0,
         fmt("max_rel_err=%.3e", worst) + " params<=" + std::to_string(params) + fmt(" time=%.2fs", secs));
}

void ac2() {
  double ce_err = 0.0;
  for (std::size_t c : {2u, 3u, 10u, 100u, 400u}) {
    for (double z : {0.0, -3.5, 12.0}) {
      ce_err = std::max(ce_err, std::abs(softmax_cross_entropy(Vector(c, z), c / 2).loss - std::log(double(c))));
    }
  }
  const double l3_err = std::max(std::abs(binary_pair_loss(0.0, 0) - std::log(2.0)),
                                 std::abs(binary_pair_loss(0.0, 1) - std::log(2.0)));
  bool monotone = true;
  double prev0 = binary_pair_loss(-20.0, 0), prev1 = binary_pair_loss(-20.0, 1);
  for (int i = 1; i <= 4000; ++i) {
    const double d = -20.0 + 0.01 * i;
    const double l0 = binary_pair_loss(d, 0), l1 = binary_pair_loss(d, 1);
    monotone = monotone && l0 > prev0 && l1 < prev1;
    prev0 = l0;
    prev1 = l1;
  }
  const bool limits = binary_pair_loss(-20.0, 0) < 1e-8 && binary_pair_loss(20.0, 1) < 1e-8 &&
                      std::abs(binary_pair_loss(20.0, 0) - 20.0) < 1e-8 &&
                      std::abs(binary_pair_loss(-20.0, 1) - 20.0) < 1e-8;
  report("AC2", ce_err <= 1e-12 && l3_err <= 1e-12 && monotone && limits,
         fmt("ce_err=%.1e", ce_err) + fmt(" l3_err=%.1e", l3_err) + " monotone=" + (monotone ? "yes" : "no") +
             " limits=" + (limits ? "yes" : "no"));
}

void ac3() {
  const auto t0 = Clock::now();
  std::size_t agree = 0;
  for (std::size_t k = 0; k < 200; ++k) {
    Rng rng = make_rng(3, "ac3", k);
    agree += metric_set_agrees(rng);
  }
  const double secs = seconds_since(t0);
  report("AC3", agree == 200 && secs < 10.0,
         std::to_string(agree) + "/200 sets agree" + fmt(" time=%.2fs", secs));
}

void ac4() {
  const FaceSynth synth(derive_seed(4, "synth"), {});
  double mid_err = 0.0, self_err = 0.0;
  std::size_t uncovered = 0, misowned = 0;
  for (std::size_t k = 0; k < 20; ++k) {
    const auto a = synth.render(synth.make_identity(2 * k), derive_seed(4, "a", k));
    const auto b = synth.render(synth.make_identity(2 * k + 1), derive_seed(4, "b", k));
    const auto m = morph_landmark(a, b, {});
    for (std::size_t i = 0; i < a.landmarks.size(); ++i) {
      mid_err = std::max({mid_err, std::abs(m.landmarks[i].x - 0.5 * (a.landmarks[i].x + b.landmarks[i].x)),
                          std::abs(m.landmarks[i].y - 0.5 * (a.landmarks[i].y + b.landmarks[i].y))});
    }
    const auto s = selfmorph(a, a, MorphFamily::Landmark, {});
    for (std::size_t r = 1; r + 1 < a.image.height(); ++r) {
      for (std::size_t c = 1; c + 1 < a.image.width(); ++c) {
        self_err = std::max(self_err, std::abs(s.image.image.at(c, r) - a.image.at(c, r)));
      }
    }
    const auto pts = with_border(m.landmarks, a.image.width(), a.image.height());
    const auto tri = triangulate(pts);
    CoverageMask mask;
    warp_to_geometry(a.image, with_border(a.landmarks, a.image.width(), a.image.height()), pts, tri, &mask);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i] < 0) {
        ++uncovered;
        continue;
      }
      const auto& t = tri.triangles[static_cast<std::size_t>(mask[i])];
      const Point p{double(i % a.image.width()), double(i / a.image.width())};
      if (!contains({pts[t[0]], pts[t[1]], pts[t[2]]}, p)) ++misowned;
    }
  }
  report("AC4", mid_err <= 1e-12 && self_err <= 1e-9 && uncovered == 0 && misowned == 0,
         fmt("midpoint_err=%.1e", mid_err) + fmt(" selfmorph_err=%.1e", self_err) +
             " uncovered=" + std::to_string(uncovered) + " misowned=" + std::to_string(misowned));
}

void ac5(const DeskData& data, const DeskConfig& cfg) {
  PairSampler sampler(data.corpus, cfg.sgd.batch_size, derive_seed(cfg.seed, "ac5"));
  std::size_t pairs = 0, violations = 0;
  std::multiset<const LabeledSample*> seen;
  for (std::size_t step = 0; step < sampler.steps_per_epoch(); ++step) {
    for (const auto& p : sampler.sample_batch(step)) {
      ++pairs;
      seen.insert(p.first);
      const bool labels = p.second->labels.y1 == p.first->labels.y1;
      const bool original = p.second->kind == SampleKind::BonaFide;
      const bool cross = (p.t() == 1) == is_morph(p.first->kind);
      violations += !(labels && original && cross);
    }
  }
  std::size_t repeats = 0;
  for (const auto* s : seen) repeats += seen.count(s) > 1;
  report("AC5", violations == 0 && repeats == 0 && pairs > 0,
         std::to_string(pairs) + " pairs, " + std::to_string(violations) + " violations");
}

struct SeedRun {
  std::map<Variant, VariantOutcome> outcomes;
  std::map<Variant, double> fused;
  double seconds = 0.0;
};

double apcer01(const std::vector<ScoredEntry>& scores) {
  const auto [s, t] = unzip(scores);
  return apcer_at_bpcer(s, t, 0.1).apcer;
}

std::string scores_text(const std::vector<ScoredEntry>& scores) {
  std::ostringstream os;
  write_scores(os, scores);
  return os.str();
}

std::string metrics_text(const std::vector<ScoredEntry>& scores) {
  const auto [s, t] = unzip(scores);
  std::ostringstream os;
  for (double d : {0.1, 0.01}) {
    const auto op = apcer_at_bpcer(s, t, d);
    os << format_exact(d) << ',' << format_exact(op.apcer) << ',' << format_threshold(op.threshold) << '\n';
  }
  write_det_csv(os, det_curve(s, t));
  return os.str();
}

}  // namespace

int main() {
  const auto start = Clock::now();
  ac1();
  ac2();
  ac3();
  ac4();

  std::vector<SeedRun> runs;
  DeskData first_data;
  DeskConfig first_cfg;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto t0 = Clock::now();
    DeskConfig cfg;
    cfg.seed = seed;
    DeskData data = build_desk_data(cfg);
    if (seed == 1) ac5(data, cfg);
    const FrModel fr = train_desk_fr(cfg, data);
    const auto sims = desk_similarities(fr, data);
    SeedRun run;
    for (Variant v : {Variant::BC, Variant::FC_V1, Variant::FC_V2}) {
      auto o = run_variant(cfg, data, v);
      run.fused[v] = apcer01(fuse_scores(o.scores, sims, FusionMode::Dissimilarity));
      run.outcomes.emplace(v, std::move(o));
    }
    run.seconds = seconds_since(t0);
    std::printf("seed %llu (%.0fs):", static_cast<unsigned long long>(seed), run.seconds);
    for (const auto& [v, o] : run.outcomes) {
      std::printf(" %s apcer@0.1=%.4f fused=%.4f sep=%.4f;", to_string(v).c_str(), o.apcer_at_01, run.fused[v],
                  o.separation.mean().value_or(NAN));
    }
    std::printf("\n");
    std::fflush(stdout);
    if (seed == 1) {
      first_data = std::move(data);
      first_cfg = cfg;
    }
    runs.push_back(std::move(run));
  }
  double desk_seconds = 0.0;
  for (const auto& r : runs) desk_seconds += r.seconds;

  auto med = [&](auto get) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(get(r));
    return median3(v);
  };
  const double bc = med([](const SeedRun& r) { return r.outcomes.at(Variant::BC).apcer_at_01; });
  const double v1 = med([](const SeedRun& r) { return r.outcomes.at(Variant::FC_V1).apcer_at_01; });
  const double v2 = med([](const SeedRun& r) { return r.outcomes.at(Variant::FC_V2).apcer_at_01; });
  const bool soft = v2 <= v1;
  report("AC6", v2 < bc && v1 < bc && v2 <= 0.8 * bc && desk_seconds < 900.0,
         fmt("median apcer@bpcer=0.1 bc=%.4f", bc) + fmt(" fc-v1=%.4f", v1) + fmt(" fc-v2=%.4f", v2) +
             fmt(" fc-v2/bc=%.3f (gate 0.8)", v2 / bc) + " soft fc-v2<=fc-v1: " + (soft ? "yes" : "no") +
             fmt(" time=%.0fs", desk_seconds));

  const double sep1 = med([](const SeedRun& r) { return r.outcomes.at(Variant::FC_V1).separation.mean().value_or(NAN); });
  const double sep2 = med([](const SeedRun& r) { return r.outcomes.at(Variant::FC_V2).separation.mean().value_or(NAN); });
  report("AC7", sep2 > sep1, fmt("median separation fc-v1=%.4f", sep1) + fmt(" fc-v2=%.4f", sep2));

  const double fused = med([](const SeedRun& r) { return r.fused.at(Variant::FC_V2); });
  report("AC8", fused <= v2, fmt("median apcer@bpcer=0.1 fc-v2=%.4f", v2) + fmt(" fc-v2+fr=%.4f", fused));

  // AC9: rebuild seed 1 from scratch and compare the written outputs byte for byte.
  {
    const DeskData again = build_desk_data(first_cfg);
    const auto rerun = run_variant(first_cfg, again, Variant::FC_V2);
    const auto& orig = runs.front().outcomes.at(Variant::FC_V2);
    std::ostringstream pa, pb;
    write_protocol(pa, first_data.protocol);
    write_protocol(pb, again.protocol);
    const bool same_scores = scores_text(orig.scores) == scores_text(rerun.scores);
    const bool same_metrics = metrics_text(orig.scores) == metrics_text(rerun.scores);
    const bool same_protocol = pa.str() == pb.str();
    const bool same_model = orig.model == rerun.model;
    report("AC9", same_scores && same_metrics && same_protocol && same_model,
           std::string("scores=") + (same_scores ? "identical" : "differ") +
               " metrics=" + (same_metrics ? "identical" : "differ") +
               " protocol=" + (same_protocol ? "identical" : "differ") + " model=" + (same_model ? "identical" : "differ"));
  }

  // AC10: checkpoint text round trip, then bit-exact scores on a 100-pair probe.
  {
    const auto& model = runs.front().outcomes.at(Variant::FC_V2).model;
    std::stringstream ss;
    save_checkpoint(ss, model);
    const DualModel loaded = std::get<DualModel>(load_checkpoint(ss));
    Protocol probe(first_data.protocol.begin(),
                   first_data.protocol.begin() + std::min<std::ptrdiff_t>(100, std::ssize(first_data.protocol)));
    const auto loader = memory_loader(first_data.images);
    const auto a = score_protocol(model, probe, loader).scores;
    const auto b = score_protocol(loaded, probe, loader).scores;
    std::size_t mismatches = a.size() == b.size() ? 0 : 1;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
      mismatches += std::memcmp(&a[i].score, &b[i].score, sizeof(double)) != 0;
    }
    report("AC10", probe.size() == 100 && a.size() == 100 && mismatches == 0,
           std::to_string(a.size()) + " pairs, " + std::to_string(mismatches) + " bit mismatches");
  }

  std::printf("acceptance: %d criteria failed, total %.0fs\n", failures, seconds_since(start));
  return failures == 0 ? 0 : 1;
}
