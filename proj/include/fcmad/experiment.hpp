#pragma once

// In-memory desk benchmark: synthetic identities, a training corpus built from
// one morph family, and a differential protocol over unseen identities built
// from another family.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fcmad/dataset.hpp"
#include "fcmad/datamine.hpp"
#include "fcmad/evalbench.hpp"
#include "fcmad/trainer.hpp"

namespace fcmad {

struct DeskConfig {
  std::uint64_t seed = 1;
  std::size_t identities = 200;
  std::size_t images_per_identity = 20;
  SynthConfig synth;
  MorphConfig morph;
  double holdout_fraction = 0.1;
  MorphFamily train_family = MorphFamily::Landmark;
  MorphFamily eval_family = MorphFamily::Latent;
  ModelConfig model;
  SgdConfig sgd;
  ProtocolOptions protocol{300, 5.0};
  std::size_t separation_identities = 40;
};

struct DeskData {
  SplitPlan split;
  IdentityPartition partition;
  Corpus corpus;
  std::map<std::string, GrayImage> images;  // every image the protocol references
  Protocol protocol;
  std::vector<LabeledSample> separation_set;
};

inline DeskData build_desk_data(const DeskConfig& cfg) {
  const FaceSynth synth(derive_seed(cfg.seed, "synth"), cfg.synth);
  std::vector<std::size_t> ids(cfg.identities);
  std::iota(ids.begin(), ids.end(), std::size_t{0});

  DeskData data;
  data.split = split_identities(ids, derive_seed(cfg.seed, "split"));
  data.partition = hold_out(data.split, cfg.holdout_fraction, derive_seed(cfg.seed, "holdout"));
  const auto& train_ids = data.partition.train;
  const auto& val_ids = data.partition.validation;

  // Training side: bona fide : selfmorph : morph = 2 : 1 : 2 for one family.
  const auto bona = generate_bona_fides(synth, train_ids.all(), cfg.images_per_identity);
  const auto generated = generate_family(synth, bona, train_ids, cfg.train_family, bona.size() / 2, bona.size(),
                                         cfg.morph, derive_seed(cfg.seed, "train-morphs"));
  std::vector<LabeledSample> self, morphs;
  for (const auto& s : generated) (is_morph(s.kind) ? morphs : self).push_back(s);
  data.corpus = assemble_dataset(bona, self, morphs, derive_seed(cfg.seed, "assemble"));

  // Evaluation side: unseen identities, held-out family.
  const auto val_bona = generate_bona_fides(synth, val_ids.all(), cfg.images_per_identity);
  const auto val_morph_count = static_cast<std::size_t>(
      std::ceil(cfg.protocol.morphs_per_bona_fide * static_cast<double>(cfg.protocol.bona_fide_pairs) / 2.0));
  const auto val_morphs = generate_family(synth, val_bona, val_ids, cfg.eval_family, 0, val_morph_count, cfg.morph,
                                          derive_seed(cfg.seed, "eval-morphs"), "val");
  std::vector<ManifestRecord> records;
  for (const auto* set : {&val_bona, &val_morphs}) {
    for (const auto& s : *set) {
      records.push_back(to_record(s));
      data.images.emplace(s.path, s.face.image);
    }
  }
  data.protocol = generate_protocol(records, cfg.eval_family, derive_seed(cfg.seed, "protocol"), cfg.protocol);

  // Fresh renders and morphs of training identities for the separation stat.
  SplitPlan sep;
  for (std::size_t i = 0; i < train_ids.first.size() && sep.first.size() < cfg.separation_identities / 2; ++i) {
    sep.first.push_back(train_ids.first[i]);
  }
  for (std::size_t i = 0; i < train_ids.second.size() && sep.second.size() < cfg.separation_identities / 2; ++i) {
    sep.second.push_back(train_ids.second[i]);
  }
  auto sep_bona = generate_bona_fides(synth, sep.all(), 5);
  for (std::size_t i = 0; i < sep_bona.size(); ++i) {
    auto& s = sep_bona[i];
    s.face = synth.render(synth.make_identity(s.labels.y1), derive_seed(cfg.seed, "separation-render", i));
  }
  const auto sep_index = bona_fides_by_identity(sep_bona);
  const auto sep_pairs = plan_morph_pairs(sep, 5 * sep.all().size(), derive_seed(cfg.seed, "sep-pairs"));
  auto sep_morphs = generate_morphs(synth, sep_index, sep_pairs, cfg.train_family, cfg.morph,
                                    derive_seed(cfg.seed, "sep-morphs"), "sep");
  data.separation_set = std::move(sep_bona);
  for (auto& m : sep_morphs) data.separation_set.push_back(std::move(m));
  return data;
}

inline ModelConfig desk_model_config(const DeskConfig& cfg) {
  ModelConfig m = cfg.model;
  m.input_dim = cfg.synth.width * cfg.synth.height;
  m.num_identities = cfg.identities;
  return m;
}

inline ImageLoader memory_loader(const std::map<std::string, GrayImage>& images) {
  return [&images](const std::string& path) -> GrayImage {
    const auto it = images.find(path);
    if (it == images.end()) throw IoError("no image " + path);
    return it->second;
  };
}

struct VariantOutcome {
  Variant variant = Variant::BC;
  DualModel model;
  std::vector<ScoredEntry> scores;
  double apcer_at_01 = 0.0;
  double apcer_at_001 = 0.0;
  SeparationStat separation;
};

inline std::pair<std::vector<double>, std::vector<GroundTruth>> unzip(const std::vector<ScoredEntry>& scores) {
  std::vector<double> s;
  std::vector<GroundTruth> t;
  for (const auto& e : scores) {
    s.push_back(e.score);
    t.push_back(e.truth);
  }
  return {s, t};
}

inline VariantOutcome run_variant(const DeskConfig& cfg, const DeskData& data, Variant variant,
                                  const TrainOptions& options = {}) {
  VariantOutcome out;
  out.variant = variant;
  out.model = train(data.corpus, desk_model_config(cfg), cfg.sgd, variant, derive_seed(cfg.seed, "train"), options)
                  .model;
  const auto scored = score_protocol(out.model, data.protocol, memory_loader(data.images));
  if (!scored.failures.empty()) throw IoError("desk benchmark: unreadable protocol images");
  out.scores = scored.scores;
  const auto [s, t] = unzip(out.scores);
  out.apcer_at_01 = apcer_at_bpcer(s, t, 0.1).apcer;
  out.apcer_at_001 = apcer_at_bpcer(s, t, 0.01).apcer;
  out.separation = morph_separation_stat(out.model, data.separation_set);
  return out;
}

inline FrModel train_desk_fr(const DeskConfig& cfg, const DeskData& data) {
  return train_fr_model(data.corpus, desk_model_config(cfg), cfg.sgd, derive_seed(cfg.seed, "fr"));
}

/// FR similarities over the desk protocol, in protocol order.
inline std::vector<ScoredEntry> desk_similarities(const FrModel& fr, const DeskData& data) {
  const auto sims = similarity_protocol(fr, data.protocol, memory_loader(data.images));
  if (!sims.failures.empty()) throw IoError("desk benchmark: unreadable protocol images");
  return sims.scores;
}

}  // namespace fcmad
