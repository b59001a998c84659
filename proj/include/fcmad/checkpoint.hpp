#pragma once

// Plain-text checkpoints. Values are written in shortest round-trip form, so
// save followed by load reproduces every parameter bit for bit.
//
//   fcmad-checkpoint 1
//   kind dual | fr
//   variant bc | fc-v1 | fc-v2          (dual only)
//   num_identities C
//   normalize_features 0 | 1            (dual only)
//   input_std S
//   backbone first | second | fr
//   layers K
//   layer IN OUT ACTIVATION             (K lines)
//   head first | second | fr
//   head_shape CLASSES FEATURE_DIM
//   ...                                  (one backbone/head block per network)
//   values N
//   v_1 ... v_N                          (one per line)
//
// Values run network by network: per layer the weights (row-major, out x in)
// then the biases; then the head weights (row-major) and biases.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "fcmad/error.hpp"
#include "fcmad/fused_loss.hpp"
#include "fcmad/image.hpp"
#include "fcmad/manifest.hpp"
#include "fcmad/nn.hpp"
#include "fcmad/trainer.hpp"

namespace fcmad {

inline constexpr int kCheckpointVersion = 1;

using AnyModel = std::variant<DualModel, FrModel>;

namespace detail {

inline void write_shapes(std::ostream& out, const std::string& name, const MlpBackbone& bb,
                         const ClassifierHead& head) {
  out << "backbone " << name << '\n' << "layers " << bb.layers().size() << '\n';
  for (const auto& l : bb.layers()) {
    out << "layer " << l.in_dim() << ' ' << l.out_dim() << ' ' << to_string(l.activation) << '\n';
  }
  out << "head " << name << '\n' << "head_shape " << head.num_classes() << ' ' << head.feature_dim() << '\n';
}

inline void write_values(std::ostream& out, const std::vector<std::span<const double>>& blocks) {
  std::size_t n = 0;
  for (auto b : blocks) n += b.size();
  out << "values " << n << '\n';
  for (auto b : blocks) {
    for (double v : b) out << format_exact(v) << '\n';
  }
}

class CheckpointReader {
 public:
  CheckpointReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  std::vector<std::string> line() {
    std::string text;
    while (std::getline(in_, text)) {
      ++lineno_;
      if (!text.empty() && text.back() == '\r') text.pop_back();
      if (text.empty()) continue;
      std::istringstream is(text);
      std::vector<std::string> words;
      for (std::string w; is >> w;) words.push_back(w);
      return words;
    }
    fail("unexpected end of file");
  }

  std::vector<std::string> expect(const std::string& key, std::size_t fields) {
    auto w = line();
    if (w.empty() || w[0] != key || w.size() != fields + 1) {
      fail("expected '" + key + "' with " + std::to_string(fields) + " field(s)");
    }
    return w;
  }

  std::size_t count(const std::string& s) {
    try {
      return parse_id(s, where());
    } catch (const IoError&) {
      fail("bad count '" + s + "'");
    }
  }

  double number(const std::string& s) {
    try {
      return parse_double(s);
    } catch (const Error&) {
      fail("bad number '" + s + "'");
    }
  }

  [[noreturn]] void fail(const std::string& what) const { throw IoError(where() + ": " + what); }

 private:
  std::string where() const { return name_ + ":" + std::to_string(lineno_); }

  std::istream& in_;
  std::string name_;
  std::size_t lineno_ = 0;
};

inline std::pair<MlpBackbone, ClassifierHead> read_shapes(CheckpointReader& r, const std::string& name) {
  if (r.expect("backbone", 1)[1] != name) r.fail("expected backbone '" + name + "'");
  const std::size_t k = r.count(r.expect("layers", 1)[1]);
  if (k == 0) r.fail("backbone has no layers");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i < k; ++i) {
    const auto w = r.expect("layer", 3);
    const std::size_t in = r.count(w[1]);
    const std::size_t out = r.count(w[2]);
    Activation act;
    try {
      act = activation_from_string(w[3]);
    } catch (const Error&) {
      r.fail("unknown activation '" + w[3] + "'");
    }
    layers.push_back({Tensor2(out, in), Vector(out, 0.0), act});
  }
  MlpBackbone bb;
  try {
    bb = MlpBackbone(std::move(layers));
  } catch (const ShapeError& e) {
    r.fail(e.what());
  }
  if (r.expect("head", 1)[1] != name) r.fail("expected head '" + name + "'");
  const auto hs = r.expect("head_shape", 2);
  ClassifierHead head{Tensor2(r.count(hs[1]), r.count(hs[2])), Vector(r.count(hs[1]), 0.0)};
  if (head.feature_dim() != bb.feature_dim()) r.fail("head feature dim does not match backbone");
  return {std::move(bb), std::move(head)};
}

inline void read_values(CheckpointReader& r, const std::vector<std::span<double>>& blocks) {
  std::size_t expected = 0;
  for (auto b : blocks) expected += b.size();
  const std::size_t n = r.count(r.expect("values", 1)[1]);
  if (n != expected) {
    r.fail("values count " + std::to_string(n) + " does not match shapes (" + std::to_string(expected) + ")");
  }
  for (auto b : blocks) {
    for (double& v : b) {
      const auto w = r.line();
      if (w.size() != 1) r.fail("expected one value per line");
      v = r.number(w[0]);
    }
  }
}

}  // namespace detail

inline void save_checkpoint(std::ostream& out, const DualModel& m) {
  out << "fcmad-checkpoint " << kCheckpointVersion << '\n'
      << "kind dual\n"
      << "variant " << to_string(m.variant) << '\n'
      << "num_identities " << m.num_identities << '\n'
      << "normalize_features " << (m.normalize_features ? 1 : 0) << '\n'
      << "input_std " << format_exact(m.input_std) << '\n';
  detail::write_shapes(out, "first", m.first_backbone, m.first_head);
  detail::write_shapes(out, "second", m.second_backbone, m.second_head);
  auto blocks = m.first_backbone.parameter_blocks();
  for (auto b : m.first_head.parameter_blocks()) blocks.push_back(b);
  for (auto b : m.second_backbone.parameter_blocks()) blocks.push_back(b);
  for (auto b : m.second_head.parameter_blocks()) blocks.push_back(b);
  detail::write_values(out, blocks);
}

inline void save_checkpoint(std::ostream& out, const FrModel& m) {
  out << "fcmad-checkpoint " << kCheckpointVersion << '\n'
      << "kind fr\n"
      << "num_identities " << m.head.num_classes() << '\n'
      << "input_std " << format_exact(m.input_std) << '\n';
  detail::write_shapes(out, "fr", m.backbone, m.head);
  auto blocks = m.backbone.parameter_blocks();
  for (auto b : m.head.parameter_blocks()) blocks.push_back(b);
  detail::write_values(out, blocks);
}

inline AnyModel load_checkpoint(std::istream& in, const std::string& name = "checkpoint") {
  detail::CheckpointReader r(in, name);
  const auto magic = r.expect("fcmad-checkpoint", 1);
  if (magic[1] != std::to_string(kCheckpointVersion)) r.fail("unsupported version " + magic[1]);
  const std::string kind = r.expect("kind", 1)[1];
  if (kind == "dual") {
    DualModel m;
    try {
      m.variant = variant_from_string(r.expect("variant", 1)[1]);
    } catch (const ConfigError& e) {
      r.fail(e.what());
    }
    m.num_identities = r.count(r.expect("num_identities", 1)[1]);
    const auto nf = r.expect("normalize_features", 1)[1];
    if (nf != "0" && nf != "1") r.fail("normalize_features must be 0 or 1");
    m.normalize_features = nf == "1";
    m.input_std = r.number(r.expect("input_std", 1)[1]);
    std::tie(m.first_backbone, m.first_head) = detail::read_shapes(r, "first");
    std::tie(m.second_backbone, m.second_head) = detail::read_shapes(r, "second");
    const std::size_t classes = head_classes(m.variant, m.num_identities);
    if (m.first_head.num_classes() != classes || m.second_head.num_classes() != classes) {
      r.fail("head class count does not match variant and num_identities");
    }
    detail::read_values(r, m.parameter_blocks());
    return m;
  }
  if (kind == "fr") {
    FrModel m;
    const std::size_t classes = r.count(r.expect("num_identities", 1)[1]);
    m.input_std = r.number(r.expect("input_std", 1)[1]);
    std::tie(m.backbone, m.head) = detail::read_shapes(r, "fr");
    if (m.head.num_classes() != classes) r.fail("head class count does not match num_identities");
    auto blocks = m.backbone.parameter_blocks();
    for (auto b : m.head.parameter_blocks()) blocks.push_back(b);
    detail::read_values(r, blocks);
    return m;
  }
  r.fail("unknown kind '" + kind + "'");
}

inline void save_checkpoint(const std::filesystem::path& path, const AnyModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  std::visit([&](const auto& m) { save_checkpoint(out, m); }, model);
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

inline AnyModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing checkpoint " + path.string());
  return load_checkpoint(in, path.string());
}

inline DualModel load_dual_checkpoint(const std::filesystem::path& path) {
  auto m = load_checkpoint(path);
  if (auto* d = std::get_if<DualModel>(&m)) return std::move(*d);
  throw IoError(path.string() + ": expected a dual-network checkpoint, found an FR model");
}

inline FrModel load_fr_checkpoint(const std::filesystem::path& path) {
  auto m = load_checkpoint(path);
  if (auto* f = std::get_if<FrModel>(&m)) return std::move(*f);
  throw IoError(path.string() + ": expected an FR checkpoint, found a dual-network model");
}

}  // namespace fcmad
