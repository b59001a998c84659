#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fcmad/error.hpp"
#include "fcmad/nn.hpp"

namespace fcmad {

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

inline Point lerp(Point a, Point b, double alpha) {
  return {(1.0 - alpha) * a.x + alpha * b.x, (1.0 - alpha) * a.y + alpha * b.y};
}

/// Grayscale image in [0, 1], row-major. Pixel (col, row) has its center at
/// coordinates (x = col, y = row).
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(std::size_t width, std::size_t height, double fill = 0.0)
      : width_(width), height_(height), pixels_(width * height, fill) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }

  double& at(std::size_t col, std::size_t row) { return pixels_[row * width_ + col]; }
  double at(std::size_t col, std::size_t row) const { return pixels_[row * width_ + col]; }

  std::span<double> pixels() noexcept { return pixels_; }
  std::span<const double> pixels() const noexcept { return pixels_; }

  /// Bilinear sample; coordinates are clamped to the image rectangle.
  double sample(double x, double y) const {
    x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
    const auto x0 = static_cast<std::size_t>(std::floor(x));
    const auto y0 = static_cast<std::size_t>(std::floor(y));
    const std::size_t x1 = std::min(x0 + 1, width_ - 1);
    const std::size_t y1 = std::min(y0 + 1, height_ - 1);
    const double fx = x - static_cast<double>(x0);
    const double fy = y - static_cast<double>(y0);
    const double top = at(x0, y0) + fx * (at(x1, y0) - at(x0, y0));
    const double bottom = at(x0, y1) + fx * (at(x1, y1) - at(x0, y1));
    return top + fy * (bottom - top);
  }

  void clamp01() {
    for (double& p : pixels_) p = std::clamp(p, 0.0, 1.0);
  }

  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  Vector pixels_;
};

/// A face picture with its landmark set. Morphs carry two source identities;
/// for every other image both ids are equal.
struct FaceImage {
  GrayImage image;
  std::vector<Point> landmarks;
  std::size_t identity_id = 0;
  std::size_t second_identity_id = 0;

  bool landmarks_in_bounds() const {
    return std::all_of(landmarks.begin(), landmarks.end(), [&](Point p) {
      return p.x >= 0.0 && p.y >= 0.0 && p.x <= static_cast<double>(image.width() - 1) &&
             p.y <= static_cast<double>(image.height() - 1);
    });
  }
};

inline double max_abs_diff(const GrayImage& a, const GrayImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ShapeError("max_abs_diff: image sizes differ");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) {
    m = std::max(m, std::abs(a.pixels()[i] - b.pixels()[i]));
  }
  return m;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_exact(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw IoError("cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

/// Binary PGM (P5), 16-bit big-endian samples.
inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n65535\n";
  std::vector<unsigned char> bytes;
  bytes.reserve(img.pixels().size() * 2);
  for (double p : img.pixels()) {
    const auto v = static_cast<std::uint16_t>(std::lround(std::clamp(p, 0.0, 1.0) * 65535.0));
    bytes.push_back(static_cast<unsigned char>(v >> 8));
    bytes.push_back(static_cast<unsigned char>(v & 0xff));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

/// Reads 8- or 16-bit P5.
inline GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(c);
    }
    return t;
  };
  if (token() != "P5") throw IoError(path.string() + ": not a binary PGM");
  std::size_t w = 0, h = 0;
  unsigned maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = static_cast<unsigned>(std::stoul(token()));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PGM header");
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) {
    throw IoError(path.string() + ": bad PGM header");
  }
  const std::size_t bps = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> bytes(w * h * bps);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw IoError(path.string() + ": truncated pixel data");
  }
  GrayImage img(w, h);
  auto px = img.pixels();
  for (std::size_t i = 0; i < w * h; ++i) {
    const unsigned v = bps == 2 ? (unsigned{bytes[2 * i]} << 8) | bytes[2 * i + 1] : bytes[i];
    px[i] = static_cast<double>(v) / maxval;
  }
  return img;
}

/// Landmark sidecar: one "x y" line per point.
inline void write_landmarks(const std::filesystem::path& path, const std::vector<Point>& pts) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& p : pts) out << format_exact(p.x) << ' ' << format_exact(p.y) << '\n';
}

inline std::vector<Point> read_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Point> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw IoError(path.string() + ": malformed landmark line");
    pts.push_back({parse_double(std::string_view(line).substr(0, sp)),
                   parse_double(std::string_view(line).substr(sp + 1))});
  }
  return pts;
}

}  // namespace fcmad
