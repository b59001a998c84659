#pragma once

// Landmark morphing: Delaunay triangulation of the blended landmark set,
// per-triangle inverse affine warp with bilinear sampling, and pixel blending.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fcmad/error.hpp"
#include "fcmad/image.hpp"
#include "fcmad/kinds.hpp"
#include "fcmad/synth.hpp"

namespace fcmad {

struct MorphConfig {
  double blend_alpha = 0.5;
  MorphFamily family = MorphFamily::Landmark;
};

using Triangle = std::array<Point, 3>;
using TriangleIndices = std::array<std::size_t, 3>;

struct Triangulation {
  std::vector<TriangleIndices> triangles;
};

/// Twice the signed area; positive for counter-clockwise in (x right, y up).
inline double orient(Point a, Point b, Point c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

inline double triangle_area(const Triangle& t) { return std::abs(orient(t[0], t[1], t[2])) / 2.0; }

namespace detail {

/// > 0 when d lies strictly inside the circumcircle of the CCW triangle abc.
inline double in_circle(Point a, Point b, Point c, Point d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

}  // namespace detail

/// Delaunay triangulation (Bowyer-Watson). Output triangles are CCW, rotated so
/// the smallest index comes first, and sorted; the result depends only on the
/// input points.
inline Triangulation triangulate(const std::vector<Point>& points) {
  const std::size_t n = points.size();
  if (n < 3) throw GeometryError("triangulate: need at least 3 points");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(points[i].x - points[j].x) < 1e-12 && std::abs(points[i].y - points[j].y) < 1e-12) {
        throw GeometryError("triangulate: duplicate points " + std::to_string(i) + " and " +
                            std::to_string(j));
      }
    }
  }
  double min_x = points[0].x, max_x = points[0].x, min_y = points[0].y, max_y = points[0].y;
  for (const auto& p : points) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  {
    bool collinear = true;
    for (std::size_t i = 2; i < n && collinear; ++i) {
      const double span = std::max(max_x - min_x, max_y - min_y);
      collinear = std::abs(orient(points[0], points[1], points[i])) <= 1e-12 * span * span;
    }
    if (collinear) throw GeometryError("triangulate: all points are collinear");
  }

  std::vector<Point> pts = points;
  const double span = std::max(max_x - min_x, max_y - min_y);
  const double cx = (min_x + max_x) / 2.0, cy = (min_y + max_y) / 2.0;
  const double big = 100.0 * span;
  pts.push_back({cx - 2.0 * big, cy - big});
  pts.push_back({cx + 2.0 * big, cy - big});
  pts.push_back({cx, cy + 2.0 * big});

  std::vector<TriangleIndices> tris{{n, n + 1, n + 2}};
  for (std::size_t p = 0; p < n; ++p) {
    std::vector<TriangleIndices> keep;
    std::vector<std::array<std::size_t, 2>> edges;
    for (const auto& t : tris) {
      if (detail::in_circle(pts[t[0]], pts[t[1]], pts[t[2]], pts[p]) > 0.0) {
        for (int e = 0; e < 3; ++e) edges.push_back({t[e], t[(e + 1) % 3]});
      } else {
        keep.push_back(t);
      }
    }
    // Cavity boundary: edges that appear once (shared edges appear reversed).
    for (std::size_t i = 0; i < edges.size(); ++i) {
      bool shared = false;
      for (std::size_t j = 0; j < edges.size() && !shared; ++j) {
        shared = i != j && edges[i][0] == edges[j][1] && edges[i][1] == edges[j][0];
      }
      if (!shared) keep.push_back({edges[i][0], edges[i][1], p});
    }
    tris = std::move(keep);
  }

  Triangulation out;
  for (auto t : tris) {
    if (t[0] >= n || t[1] >= n || t[2] >= n) continue;
    if (std::abs(orient(pts[t[0]], pts[t[1]], pts[t[2]])) <= 1e-12 * span * span) {
      throw GeometryError("triangulate: degenerate triangle produced");
    }
    while (t[0] > t[1] || t[0] > t[2]) t = {t[1], t[2], t[0]};
    out.triangles.push_back(t);
  }
  std::sort(out.triangles.begin(), out.triangles.end());
  return out;
}

/// 4 corners and 4 edge midpoints of the pixel-center rectangle.
inline std::vector<Point> border_points(std::size_t width, std::size_t height) {
  const double w = static_cast<double>(width - 1);
  const double h = static_cast<double>(height - 1);
  return {{0, 0}, {w, 0}, {w, h}, {0, h}, {w / 2, 0}, {w, h / 2}, {w / 2, h}, {0, h / 2}};
}

/// x' = a x + b y + c, y' = d x + e y + f.
struct AffineMap {
  double a = 1, b = 0, c = 0, d = 0, e = 1, f = 0;

  Point operator()(Point p) const { return {a * p.x + b * p.y + c, d * p.x + e * p.y + f}; }

  /// The unique map sending from[i] to to[i].
  static AffineMap solve(const Triangle& from, const Triangle& to) {
    const double det = orient(from[0], from[1], from[2]);
    if (det == 0.0 || !std::isfinite(det)) throw GeometryError("affine: degenerate triangle");
    // Barycentric basis of `from`, expressed as affine functions of (x, y).
    AffineMap m{};
    auto coeffs = [&](int i) {
      const Point& p = from[(i + 1) % 3];
      const Point& q = from[(i + 2) % 3];
      // lambda_i(x, y) = orient(p, q, (x, y)) / det
      return std::array<double, 3>{(p.y - q.y) / det, (q.x - p.x) / det,
                                   (p.x * q.y - q.x * p.y) / det};
    };
    const auto l0 = coeffs(0), l1 = coeffs(1), l2 = coeffs(2);
    m.a = to[0].x * l0[0] + to[1].x * l1[0] + to[2].x * l2[0];
    m.b = to[0].x * l0[1] + to[1].x * l1[1] + to[2].x * l2[1];
    m.c = to[0].x * l0[2] + to[1].x * l1[2] + to[2].x * l2[2];
    m.d = to[0].y * l0[0] + to[1].y * l1[0] + to[2].y * l2[0];
    m.e = to[0].y * l0[1] + to[1].y * l1[1] + to[2].y * l2[1];
    m.f = to[0].y * l0[2] + to[1].y * l1[2] + to[2].y * l2[2];
    return m;
  }
};

/// Closed-triangle membership with a small tolerance for pixel centers that
/// sit exactly on an edge.
inline bool contains(const Triangle& t, Point p) {
  const double area = orient(t[0], t[1], t[2]);
  const double tol = 1e-9 * std::abs(area);
  const double s = area > 0 ? 1.0 : -1.0;
  return s * orient(t[0], t[1], p) >= -tol && s * orient(t[1], t[2], p) >= -tol &&
         s * orient(t[2], t[0], p) >= -tol;
}

/// Pixel ownership for a sequence of warps: -1 = unwritten, otherwise the
/// index of the triangle that wrote the pixel.
using CoverageMask = std::vector<int>;

/// Inverse-maps every destination pixel inside dst_tri into src_image and
/// writes the bilinear sample into `accumulator`. With a coverage mask, pixels
/// already owned by an earlier triangle are skipped, so on shared edges the
/// lowest-indexed triangle wins.
inline void warp_affine_triangle(const GrayImage& src_image, const Triangle& src_tri,
                                 const Triangle& dst_tri, GrayImage& accumulator,
                                 CoverageMask* mask = nullptr, int triangle_index = 0) {
  if (triangle_area(src_tri) <= 0.0) throw GeometryError("warp: degenerate source triangle");
  const AffineMap to_src = AffineMap::solve(dst_tri, src_tri);
  const double W = static_cast<double>(accumulator.width());
  const double H = static_cast<double>(accumulator.height());
  if (mask && mask->size() != accumulator.width() * accumulator.height()) {
    throw ShapeError("warp: coverage mask size mismatch");
  }
  double lo_x = std::min({dst_tri[0].x, dst_tri[1].x, dst_tri[2].x});
  double hi_x = std::max({dst_tri[0].x, dst_tri[1].x, dst_tri[2].x});
  double lo_y = std::min({dst_tri[0].y, dst_tri[1].y, dst_tri[2].y});
  double hi_y = std::max({dst_tri[0].y, dst_tri[1].y, dst_tri[2].y});
  const auto c0 = static_cast<long>(std::max(0.0, std::floor(lo_x)));
  const auto c1 = static_cast<long>(std::min(W - 1, std::ceil(hi_x)));
  const auto r0 = static_cast<long>(std::max(0.0, std::floor(lo_y)));
  const auto r1 = static_cast<long>(std::min(H - 1, std::ceil(hi_y)));
  for (long r = r0; r <= r1; ++r) {
    for (long c = c0; c <= c1; ++c) {
      const Point p{static_cast<double>(c), static_cast<double>(r)};
      if (!contains(dst_tri, p)) continue;
      const auto idx = static_cast<std::size_t>(r) * accumulator.width() + static_cast<std::size_t>(c);
      if (mask) {
        if ((*mask)[idx] >= 0) continue;
        (*mask)[idx] = triangle_index;
      }
      const Point s = to_src(p);
      accumulator.at(static_cast<std::size_t>(c), static_cast<std::size_t>(r)) =
          src_image.sample(s.x, s.y);
    }
  }
}

inline std::vector<Point> with_border(std::vector<Point> landmarks, std::size_t width,
                                      std::size_t height) {
  for (const auto& b : border_points(width, height)) landmarks.push_back(b);
  return landmarks;
}

/// Warps `src` (with landmarks `src_points`) onto `dst_points`, triangle by
/// triangle in triangulation order. Returns the coverage mask if requested.
inline GrayImage warp_to_geometry(const GrayImage& src, const std::vector<Point>& src_points,
                                  const std::vector<Point>& dst_points, const Triangulation& tri,
                                  CoverageMask* coverage = nullptr) {
  GrayImage out(src.width(), src.height());
  CoverageMask mask(src.width() * src.height(), -1);
  for (std::size_t i = 0; i < tri.triangles.size(); ++i) {
    const auto& t = tri.triangles[i];
    warp_affine_triangle(src, {src_points[t[0]], src_points[t[1]], src_points[t[2]]},
                         {dst_points[t[0]], dst_points[t[1]], dst_points[t[2]]}, out, &mask,
                         static_cast<int>(i));
  }
  if (coverage) *coverage = std::move(mask);
  return out;
}

/// Both images are warped onto (1 - alpha) p_a + alpha p_b and blended with
/// the same weights. The triangulation is built once on the blended landmarks
/// plus border points and indexes all three landmark sets.
inline FaceImage morph_landmark(const FaceImage& a, const FaceImage& b, const MorphConfig& config) {
  if (a.landmarks.size() != b.landmarks.size()) {
    throw TopologyError("morph: landmark counts differ (" + std::to_string(a.landmarks.size()) +
                        " vs " + std::to_string(b.landmarks.size()) + ")");
  }
  if (a.image.width() != b.image.width() || a.image.height() != b.image.height()) {
    throw TopologyError("morph: image sizes differ");
  }
  const double alpha = config.blend_alpha;
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw RangeError("morph: blend_alpha not in [0, 1]");
  const std::size_t w = a.image.width(), h = a.image.height();

  FaceImage out;
  out.identity_id = a.identity_id;
  out.second_identity_id = b.identity_id;
  out.landmarks.resize(a.landmarks.size());
  for (std::size_t k = 0; k < a.landmarks.size(); ++k) {
    out.landmarks[k] = lerp(a.landmarks[k], b.landmarks[k], alpha);
  }
  const auto target = with_border(out.landmarks, w, h);
  const auto tri = triangulate(target);
  const auto wa = warp_to_geometry(a.image, with_border(a.landmarks, w, h), target, tri);
  const auto wb = warp_to_geometry(b.image, with_border(b.landmarks, w, h), target, tri);
  out.image = GrayImage(w, h);
  auto px = out.image.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = (1.0 - alpha) * wa.pixels()[i] + alpha * wb.pixels()[i];
  }
  out.image.clamp01();
  return out;
}

/// Latent-space morph: render of the interpolated identity code.
inline FaceImage morph_latent(const FaceSynth& synth, const IdentityModel& a,
                              const IdentityModel& b, const MorphConfig& config,
                              std::uint64_t variation_seed) {
  return synth.latent_interpolate(a, b, config.blend_alpha, variation_seed).image;
}

struct LabeledImage {
  FaceImage image;
  SampleKind kind = SampleKind::BonaFide;
  DualLabels labels;
};

/// Morph of two images of one identity, labeled bona fide (y1 = y2 = id). The
/// latent family needs the generator to re-render the blended code.
inline LabeledImage selfmorph(const FaceImage& a, const FaceImage& a2, MorphFamily family,
                              const MorphConfig& config, const FaceSynth* synth = nullptr,
                              std::uint64_t variation_seed = 0) {
  if (a.identity_id != a2.identity_id || a.identity_id != a.second_identity_id ||
      a2.identity_id != a2.second_identity_id) {
    throw MisuseError("selfmorph: inputs must be bona fide images of one identity (got " +
                      std::to_string(a.identity_id) + " and " + std::to_string(a2.identity_id) + ")");
  }
  LabeledImage out;
  out.kind = selfmorph_kind(family);
  out.labels = {a.identity_id, a.identity_id};
  if (family == MorphFamily::Landmark) {
    out.image = morph_landmark(a, a2, config);
  } else {
    if (!synth) throw MisuseError("selfmorph: latent family requires the face generator");
    const auto id = synth->make_identity(a.identity_id);
    out.image = morph_latent(*synth, id, id, config, variation_seed);
  }
  return out;
}

}  // namespace fcmad
