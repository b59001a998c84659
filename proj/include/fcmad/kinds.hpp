#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "fcmad/error.hpp"

namespace fcmad {

/// Identity labels of an image: equal for bona fides and selfmorphs, the two
/// source identities for a morph.
struct DualLabels {
  std::size_t y1 = 0;
  std::size_t y2 = 0;

  bool operator==(const DualLabels&) const = default;
};

enum class MorphFamily { Landmark, Latent };

/// Provenance of an image. Selfmorphs count as bona fide for labeling.
enum class SampleKind {
  BonaFide,
  SelfmorphLandmark,
  SelfmorphLatent,
  MorphLandmark,
  MorphLatent,
};

inline bool is_morph(SampleKind k) {
  return k == SampleKind::MorphLandmark || k == SampleKind::MorphLatent;
}

inline bool is_selfmorph(SampleKind k) {
  return k == SampleKind::SelfmorphLandmark || k == SampleKind::SelfmorphLatent;
}

inline MorphFamily family_of(SampleKind k) {
  return (k == SampleKind::SelfmorphLatent || k == SampleKind::MorphLatent) ? MorphFamily::Latent
                                                                            : MorphFamily::Landmark;
}

inline SampleKind morph_kind(MorphFamily f) {
  return f == MorphFamily::Landmark ? SampleKind::MorphLandmark : SampleKind::MorphLatent;
}

inline SampleKind selfmorph_kind(MorphFamily f) {
  return f == MorphFamily::Landmark ? SampleKind::SelfmorphLandmark : SampleKind::SelfmorphLatent;
}

inline std::string to_string(SampleKind k) {
  switch (k) {
    case SampleKind::BonaFide: return "bonafide";
    case SampleKind::SelfmorphLandmark: return "selfmorph-lm";
    case SampleKind::SelfmorphLatent: return "selfmorph-latent";
    case SampleKind::MorphLandmark: return "morph-lm";
    case SampleKind::MorphLatent: return "morph-latent";
  }
  return "?";
}

inline SampleKind sample_kind_from_string(std::string_view s) {
  if (s == "bonafide") return SampleKind::BonaFide;
  if (s == "selfmorph-lm") return SampleKind::SelfmorphLandmark;
  if (s == "selfmorph-latent") return SampleKind::SelfmorphLatent;
  if (s == "morph-lm") return SampleKind::MorphLandmark;
  if (s == "morph-latent") return SampleKind::MorphLatent;
  throw ConfigError("unknown sample kind '" + std::string(s) + "'");
}

inline std::string to_string(MorphFamily f) {
  return f == MorphFamily::Landmark ? "landmark" : "latent";
}

inline MorphFamily morph_family_from_string(std::string_view s) {
  if (s == "landmark" || s == "lm") return MorphFamily::Landmark;
  if (s == "latent") return MorphFamily::Latent;
  throw ConfigError("unknown morph family '" + std::string(s) + "'");
}

}  // namespace fcmad
