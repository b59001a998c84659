#pragma once

// Glue between the generator, the morph pipeline and the corpus types:
// renders bona fides, selfmorphs and cross-identity morphs with stable
// relative paths and labels.

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <iterator>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fcmad/datamine.hpp"
#include "fcmad/manifest.hpp"
#include "fcmad/morph.hpp"
#include "fcmad/synth.hpp"

namespace fcmad {

using IdentityIndex = std::map<std::size_t, std::vector<const LabeledSample*>>;

inline IdentityIndex bona_fides_by_identity(const std::vector<LabeledSample>& samples) {
  IdentityIndex index;
  for (const auto& s : samples) {
    if (s.kind == SampleKind::BonaFide) index[s.labels.y1].push_back(&s);
  }
  return index;
}

inline std::string bona_fide_path(std::size_t id, std::size_t image) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "bonafide/id%04zu_%02zu.pgm", id, image);
  return buf;
}

/// Throws when two identities' latents are closer than the configured floor.
inline void check_latent_floor(const std::vector<IdentityModel>& models, double floor_deg) {
  if (models.size() < 2) return;
  const double angle = min_pairwise_angle_deg(models);
  if (!(angle > floor_deg)) {
    throw ConfigError("synth: identity latents only " + std::to_string(angle) + " degrees apart (floor " +
                      std::to_string(floor_deg) + "); raise latent_dim or change the seed");
  }
}

/// `per_identity` renders of each identity.
inline std::vector<LabeledSample> generate_bona_fides(const FaceSynth& synth, const std::vector<std::size_t>& ids,
                                                      std::size_t per_identity) {
  std::vector<IdentityModel> models;
  for (auto id : ids) models.push_back(synth.make_identity(id));
  check_latent_floor(models, synth.config().min_latent_angle_deg);
  std::vector<LabeledSample> out;
  out.reserve(ids.size() * per_identity);
  for (const auto& model : models) {
    const auto id = model.identity_id;
    for (std::size_t k = 0; k < per_identity; ++k) {
      LabeledSample s;
      s.path = bona_fide_path(id, k);
      s.face = synth.render(model, derive_seed(synth.seed(), "render", id * 100003 + k));
      s.labels = {id, id};
      s.kind = SampleKind::BonaFide;
      out.push_back(std::move(s));
    }
  }
  return out;
}

/// `count` selfmorphs over identities drawn uniformly from `index`; each uses
/// two distinct images of one identity. `tag` keeps paths of separate batches
/// apart.
inline std::vector<LabeledSample> generate_selfmorphs(const FaceSynth& synth, const IdentityIndex& index,
                                                      MorphFamily family, std::size_t count,
                                                      const MorphConfig& config, std::uint64_t seed,
                                                      const std::string& tag = "") {
  std::vector<const std::vector<const LabeledSample*>*> eligible;
  for (const auto& [id, imgs] : index) {
    if (imgs.size() >= 2) eligible.push_back(&imgs);
  }
  if (eligible.empty() && count > 0) throw CoverageError("selfmorphs: no identity has two images");
  Rng rng = make_rng(seed, "selfmorph-" + to_string(family) + tag);
  std::vector<LabeledSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& imgs = *eligible[uniform_index(rng, eligible.size())];
    const std::size_t a = uniform_index(rng, imgs.size());
    std::size_t b = uniform_index(rng, imgs.size() - 1);
    if (b >= a) ++b;
    const auto variation = derive_seed(seed, "selfmorph-render" + tag, i);
    auto labeled = selfmorph(imgs[a]->face, imgs[b]->face, family, config, &synth, variation);
    LabeledSample s;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s/%s%06zu_%zu.pgm", to_string(labeled.kind).c_str(), tag.c_str(), i,
                  labeled.labels.y1);
    s.path = buf;
    s.face = std::move(labeled.image);
    s.labels = labeled.labels;
    s.kind = labeled.kind;
    out.push_back(std::move(s));
  }
  return out;
}

/// One morph per planned (first, second) identity pair, using a random image
/// of each source for the landmark family.
inline std::vector<LabeledSample> generate_morphs(const FaceSynth& synth, const IdentityIndex& index,
                                                  const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                                  MorphFamily family, const MorphConfig& config,
                                                  std::uint64_t seed, const std::string& tag = "") {
  Rng rng = make_rng(seed, "morph-" + to_string(family) + tag);
  std::vector<LabeledSample> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [ya, yb] = pairs[i];
    LabeledSample s;
    if (family == MorphFamily::Landmark) {
      const auto ia = index.find(ya);
      const auto ib = index.find(yb);
      if (ia == index.end() || ib == index.end()) {
        throw CoverageError("morphs: no bona fide image for identity " +
                            std::to_string(ia == index.end() ? ya : yb));
      }
      const auto* a = ia->second[uniform_index(rng, ia->second.size())];
      const auto* b = ib->second[uniform_index(rng, ib->second.size())];
      s.face = morph_landmark(a->face, b->face, config);
    } else {
      s.face = morph_latent(synth, synth.make_identity(ya), synth.make_identity(yb), config,
                            derive_seed(seed, "morph-render" + tag, i));
    }
    s.kind = morph_kind(family);
    s.labels = {ya, yb};
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s/%s%06zu_%zu_%zu.pgm", to_string(s.kind).c_str(), tag.c_str(), i, ya, yb);
    s.path = buf;
    out.push_back(std::move(s));
  }
  return out;
}

/// Selfmorphs and cross-identity morphs of one family drawn from `bona`.
/// Morph pairs follow `split`; `tag` keeps batches with different roles apart.
inline std::vector<LabeledSample> generate_family(const FaceSynth& synth, const std::vector<LabeledSample>& bona,
                                                  const SplitPlan& split, MorphFamily family,
                                                  std::size_t selfmorphs, std::size_t morphs,
                                                  const MorphConfig& config, std::uint64_t seed,
                                                  const std::string& tag = "") {
  const auto index = bona_fides_by_identity(bona);
  auto out = generate_selfmorphs(synth, index, family, selfmorphs, config, derive_seed(seed, "selfmorphs"), tag);
  const auto pairs = plan_morph_pairs(split, morphs, derive_seed(seed, "pairs-" + to_string(family)));
  auto m = generate_morphs(synth, index, pairs, family, config, derive_seed(seed, "morphs"), tag);
  out.insert(out.end(), std::make_move_iterator(m.begin()), std::make_move_iterator(m.end()));
  return out;
}

inline ManifestRecord to_record(const LabeledSample& s) {
  return {s.path, s.labels.y1, s.labels.y2, s.kind};
}

}  // namespace fcmad
