#pragma once

// Procedural identity model and face renderer. Every identity is a unit
// latent vector; landmark geometry and intensity palette are fixed linear
// projections of that latent, so interpolating latents interpolates both.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fcmad/error.hpp"
#include "fcmad/image.hpp"
#include "fcmad/nn.hpp"
#include "fcmad/random.hpp"

namespace fcmad {

inline constexpr std::size_t kLandmarkCount = 13;

/// Semantic order of the landmark set.
enum class Landmark : std::size_t {
  LeftEye,
  RightEye,
  LeftBrow,
  RightBrow,
  Nose,
  MouthLeft,
  MouthRight,
  Chin,
  LeftCheek,
  RightCheek,
  Forehead,
  JawLeft,
  JawRight,
};

struct SynthConfig {
  std::size_t width = 32;
  std::size_t height = 32;
  std::size_t latent_dim = 16;
  double geometry_scale = 1.2;   // px of landmark offset per unit latent projection
  double palette_scale = 0.15;   // intensity change per unit latent projection
  double pose_jitter = 0.5;      // px, global shift per render
  double landmark_jitter = 0.3;  // px, independent per landmark per render
  double pixel_noise = 0.03;     // std of additive noise
  double illumination_jitter = 0.04;
  double min_latent_angle_deg = 20.0;

  void validate() const {
    if (width < 16 || height < 16) throw ConfigError("synth: image must be at least 16x16");
    if (latent_dim < 2) throw ConfigError("synth: latent_dim must be >= 2");
    if (geometry_scale < 0 || palette_scale < 0 || pose_jitter < 0 || landmark_jitter < 0 ||
        pixel_noise < 0 || illumination_jitter < 0) {
      throw ConfigError("synth: scales and jitters must be non-negative");
    }
  }
};

/// Rendering parameters derived from a latent.
struct FaceStyle {
  std::array<Point, kLandmarkCount> landmarks{};  // before per-render jitter
  std::array<double, kLandmarkCount> blob_amplitude{};
  std::array<double, 4> texture{};
  double skin = 0.55;
  double background = 0.15;
};

struct IdentityModel {
  std::size_t identity_id = 0;
  Vector latent;
  FaceStyle style;
};

struct LatentInterpolation {
  Vector latent;
  FaceImage image;
};

inline double angle_between(std::span<const double> a, std::span<const double> b) {
  const double c = dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
  return std::acos(std::clamp(c, -1.0, 1.0));
}

class FaceSynth {
 public:
  FaceSynth(std::uint64_t seed, SynthConfig config) : seed_(seed), cfg_(config) {
    cfg_.validate();
    Rng rng = make_rng(seed_, "synth-projection");
    const std::size_t L = cfg_.latent_dim;
    // Unit-variance projections of a unit latent.
    auto fill = [&](Tensor2& m) {
      for (double& v : m.values()) v = normal(rng);
    };
    geometry_ = Tensor2(2 * kLandmarkCount, L);
    palette_ = Tensor2(kLandmarkCount + 4 + 2, L);
    fill(geometry_);
    fill(palette_);
    for (auto& f : frequencies_) {
      f = {uniform(rng, 0.25, 0.9), uniform(rng, -0.9, 0.9), uniform(rng, 0.0, 6.283185307179586)};
    }
  }

  const SynthConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }

  /// Deterministic in (seed, identity_id).
  IdentityModel make_identity(std::size_t identity_id) const {
    Rng rng = make_rng(seed_, "identity", identity_id);
    Vector latent(cfg_.latent_dim);
    for (double& v : latent) v = normal(rng);
    latent = l2_normalize(latent);
    return {identity_id, latent, style_for(latent)};
  }

  FaceStyle style_for(std::span<const double> latent) const {
    if (latent.size() != cfg_.latent_dim) throw ShapeError("synth: latent dim mismatch");
    const double sx = static_cast<double>(cfg_.width) / 32.0;
    const double sy = static_cast<double>(cfg_.height) / 32.0;
    static constexpr std::array<Point, kLandmarkCount> base{{
        {11.0, 13.0}, {21.0, 13.0}, {11.0, 10.0}, {21.0, 10.0}, {16.0, 17.0},
        {12.5, 22.0}, {19.5, 22.0}, {16.0, 27.0}, {9.0, 19.0},  {23.0, 19.0},
        {16.0, 6.5},  {10.0, 24.5}, {22.0, 24.5},
    }};
    static constexpr std::array<double, kLandmarkCount> amplitude{
        -0.32, -0.32, -0.22, -0.22, 0.10, -0.20, -0.20, 0.06, 0.10, 0.10, 0.08, -0.06, -0.06};

    FaceStyle s;
    for (std::size_t k = 0; k < kLandmarkCount; ++k) {
      const double ox = std::clamp(dot(geometry_.row(2 * k), latent), -2.5, 2.5);
      const double oy = std::clamp(dot(geometry_.row(2 * k + 1), latent), -2.5, 2.5);
      s.landmarks[k] = {base[k].x * sx + cfg_.geometry_scale * ox * sx,
                        base[k].y * sy + cfg_.geometry_scale * oy * sy};
      s.blob_amplitude[k] =
          amplitude[k] + cfg_.palette_scale * std::clamp(dot(palette_.row(k), latent), -2.5, 2.5);
    }
    for (std::size_t j = 0; j < s.texture.size(); ++j) {
      s.texture[j] = 0.5 * cfg_.palette_scale * dot(palette_.row(kLandmarkCount + j), latent);
    }
    s.skin = 0.55 + cfg_.palette_scale * dot(palette_.row(kLandmarkCount + 4), latent);
    s.background = 0.15 + 0.5 * cfg_.palette_scale * dot(palette_.row(kLandmarkCount + 5), latent);
    return s;
  }

  FaceImage render(const IdentityModel& identity, std::uint64_t variation_seed) const {
    FaceImage out = render_style(identity.style, variation_seed);
    out.identity_id = identity.identity_id;
    out.second_identity_id = identity.identity_id;
    return out;
  }

  /// Renders from normalize((1 - alpha) a + alpha b). The result keeps both
  /// source ids.
  LatentInterpolation latent_interpolate(const IdentityModel& a, const IdentityModel& b,
                                         double alpha, std::uint64_t variation_seed) const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw RangeError("latent_interpolate: alpha not in [0, 1]");
    if (a.latent.size() != b.latent.size()) throw ShapeError("latent_interpolate: latent dims differ");
    Vector mix(a.latent.size());
    for (std::size_t i = 0; i < mix.size(); ++i) {
      mix[i] = (1.0 - alpha) * a.latent[i] + alpha * b.latent[i];
    }
    if (std::sqrt(dot(mix, mix)) < 1e-6) {
      throw NumericError("latent_interpolate: degenerate latent (antipodal sources)");
    }
    LatentInterpolation out;
    out.latent = alpha == 0.0 ? a.latent : alpha == 1.0 ? b.latent : l2_normalize(mix);
    out.image = render_style(style_for(out.latent), variation_seed);
    out.image.identity_id = a.identity_id;
    out.image.second_identity_id = b.identity_id;
    return out;
  }

 private:
  FaceImage render_style(const FaceStyle& style, std::uint64_t variation_seed) const {
    Rng rng = make_rng(variation_seed, "render");
    const double W = static_cast<double>(cfg_.width);
    const double H = static_cast<double>(cfg_.height);
    const double sx = W / 32.0;
    const double sy = H / 32.0;
    const double shift_x = cfg_.pose_jitter * normal(rng);
    const double shift_y = cfg_.pose_jitter * normal(rng);
    const double gain = 1.0 + cfg_.illumination_jitter * normal(rng);
    const double bias = cfg_.illumination_jitter * normal(rng);

    FaceImage face;
    face.landmarks.resize(kLandmarkCount);
    for (std::size_t k = 0; k < kLandmarkCount; ++k) {
      double x = style.landmarks[k].x + shift_x + cfg_.landmark_jitter * normal(rng);
      double y = style.landmarks[k].y + shift_y + cfg_.landmark_jitter * normal(rng);
      face.landmarks[k] = {std::clamp(x, 1.5, W - 2.5), std::clamp(y, 1.5, H - 2.5)};
    }
    const auto& lm = face.landmarks;
    auto L = [&](Landmark l) { return lm[static_cast<std::size_t>(l)]; };

    // Head ellipse spanned by the outer landmarks.
    const Point center{(L(Landmark::LeftCheek).x + L(Landmark::RightCheek).x) / 2.0,
                       (L(Landmark::Forehead).y + L(Landmark::Chin).y) / 2.0};
    const double rx = std::max(4.0, (L(Landmark::RightCheek).x - L(Landmark::LeftCheek).x) / 2.0 + 2.5 * sx);
    const double ry = std::max(4.0, (L(Landmark::Chin).y - L(Landmark::Forehead).y) / 2.0 + 2.5 * sy);

    face.image = GrayImage(cfg_.width, cfg_.height);
    for (std::size_t r = 0; r < cfg_.height; ++r) {
      for (std::size_t c = 0; c < cfg_.width; ++c) {
        const double x = static_cast<double>(c);
        const double y = static_cast<double>(r);
        const double ex = (x - center.x) / rx;
        const double ey = (y - center.y) / ry;
        const double inside = sigmoid(6.0 * (1.0 - std::sqrt(ex * ex + ey * ey)));
        double v = style.background + inside * (style.skin - style.background);
        for (std::size_t j = 0; j < style.texture.size(); ++j) {
          const auto& f = frequencies_[j];
          v += inside * style.texture[j] * std::sin(f[0] * (x - center.x) + f[1] * (y - center.y) + f[2]);
        }
        for (std::size_t k = 0; k < kLandmarkCount; ++k) {
          const double sigma = (k == 2 || k == 3) ? 1.6 * sx : 1.2 * sx;
          const double dx = (x - lm[k].x) / ((k == 2 || k == 3) ? 1.6 : 1.0);
          const double dy = (y - lm[k].y) * ((k == 2 || k == 3) ? 1.6 : 1.0);
          v += style.blob_amplitude[k] * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
        v = gain * v + bias + cfg_.pixel_noise * normal(rng);
        face.image.at(c, r) = v;
      }
    }
    face.image.clamp01();
    return face;
  }

  std::uint64_t seed_;
  SynthConfig cfg_;
  Tensor2 geometry_;
  Tensor2 palette_;
  std::array<std::array<double, 3>, 4> frequencies_{};
};

inline IdentityModel make_identity(std::uint64_t seed, std::size_t identity_id,
                                   const SynthConfig& config = {}) {
  return FaceSynth(seed, config).make_identity(identity_id);
}

/// Smallest pairwise angle (degrees) among the given latents.
inline double min_pairwise_angle_deg(const std::vector<IdentityModel>& ids) {
  double best = 180.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      best = std::min(best, angle_between(ids[i].latent, ids[j].latent) * 180.0 / 3.14159265358979323846);
    }
  }
  return best;
}

}  // namespace fcmad
