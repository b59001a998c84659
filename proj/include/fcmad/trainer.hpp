#pragma once

// Dual-network training: two independent backbones with their own heads,
// trained jointly on the fused objective with SGD + momentum.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fcmad/datamine.hpp"
#include "fcmad/error.hpp"
#include "fcmad/fused_loss.hpp"
#include "fcmad/nn.hpp"
#include "fcmad/random.hpp"

namespace fcmad {

struct ModelConfig {
  std::size_t input_dim = 32 * 32;
  std::vector<std::size_t> hidden{256};
  std::size_t feature_dim = 64;
  Activation hidden_activation = Activation::Relu;
  bool normalize_features = false;
  double input_std = 0.25;
  std::size_t num_identities = 0;

  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> d{input_dim};
    d.insert(d.end(), hidden.begin(), hidden.end());
    d.push_back(feature_dim);
    return d;
  }
};

enum class Network { First, Second };

struct DualModel {
  MlpBackbone first_backbone;
  MlpBackbone second_backbone;
  ClassifierHead first_head;
  ClassifierHead second_head;
  Variant variant = Variant::FC_V1;
  std::size_t num_identities = 0;
  bool normalize_features = false;
  double input_std = 0.25;

  static DualModel create(const ModelConfig& cfg, Variant variant, std::uint64_t seed) {
    if (cfg.num_identities == 0) throw ConfigError("model: num_identities must be > 0");
    if (!(cfg.input_std >= 0.0) || !std::isfinite(cfg.input_std)) {
      throw ConfigError("model: input_std must be finite and >= 0");
    }
    const auto dims = cfg.dims();
    Rng r1 = make_rng(seed, "first-backbone");
    Rng r2 = make_rng(seed, "second-backbone");
    Rng r3 = make_rng(seed, "first-head");
    Rng r4 = make_rng(seed, "second-head");
    const std::size_t classes = head_classes(variant, cfg.num_identities);
    return {MlpBackbone::glorot(dims, cfg.hidden_activation, r1),
            MlpBackbone::glorot(dims, cfg.hidden_activation, r2),
            ClassifierHead::glorot(classes, cfg.feature_dim, r3),
            ClassifierHead::glorot(classes, cfg.feature_dim, r4),
            variant,
            cfg.num_identities,
            cfg.normalize_features,
            cfg.input_std};
  }

  DualModel zeros_like() const {
    DualModel z = *this;
    z.first_backbone.set_zero();
    z.second_backbone.set_zero();
    z.first_head = first_head.zeros_like();
    z.second_head = second_head.zeros_like();
    return z;
  }

  const MlpBackbone& backbone(Network n) const {
    return n == Network::First ? first_backbone : second_backbone;
  }

  std::vector<std::span<double>> network_blocks(Network n) {
    auto blocks = (n == Network::First ? first_backbone : second_backbone).parameter_blocks();
    for (auto b : (n == Network::First ? first_head : second_head).parameter_blocks()) blocks.push_back(b);
    return blocks;
  }

  std::vector<std::span<double>> parameter_blocks() {
    auto blocks = network_blocks(Network::First);
    for (auto b : network_blocks(Network::Second)) blocks.push_back(b);
    return blocks;
  }

  std::size_t parameter_count() const {
    return first_backbone.parameter_count() + second_backbone.parameter_count() +
           first_head.weights.size() + first_head.biases.size() + second_head.weights.size() +
           second_head.biases.size();
  }

  bool operator==(const DualModel&) const = default;
};

/// Backbone input for an image: pixels standardized per image to zero mean
/// and standard deviation `input_std`. A flat image maps to zeros; input_std 0
/// feeds raw pixels.
inline void prepare_input(std::span<const double> pixels, double input_std, std::span<double> out) {
  if (out.size() != pixels.size()) throw ShapeError("prepare_input: size mismatch");
  if (input_std == 0.0) {
    std::copy(pixels.begin(), pixels.end(), out.begin());
    return;
  }
  double mean = 0.0;
  for (double v : pixels) mean += v;
  mean /= static_cast<double>(pixels.size());
  double var = 0.0;
  for (double v : pixels) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(pixels.size()));
  const double k = sd > 0.0 ? input_std / sd : 0.0;
  for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = (pixels[i] - mean) * k;
}

inline Vector prepare_input(std::span<const double> pixels, double input_std) {
  Vector out(pixels.size());
  prepare_input(pixels, input_std, out);
  return out;
}

inline Vector extract_features(const DualModel& model, const GrayImage& image, Network which) {
  const auto& bb = model.backbone(which);
  if (image.pixels().size() != bb.input_dim()) {
    throw ShapeError("extract_features: image has " + std::to_string(image.pixels().size()) +
                     " pixels, model expects " + std::to_string(bb.input_dim()));
  }
  return bb.forward(prepare_input(image.pixels(), model.input_std));
}

/// One batch prepared for the loss: row i of each matrix is pair i.
struct PairBatch {
  Tensor2 first_inputs;
  Tensor2 second_inputs;
  std::vector<AllocatedLabels> labels;
  std::vector<int> t;
};

inline PairBatch make_pair_batch(const std::vector<PairSample>& pairs, Variant variant,
                                 std::size_t num_identities, double input_std) {
  if (pairs.empty()) throw ConfigError("batch: empty");
  const std::size_t dim = pairs.front().first->face.image.pixels().size();
  PairBatch b{Tensor2(pairs.size(), dim), Tensor2(pairs.size(), dim), {}, {}};
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const auto fp = p.first->face.image.pixels();
    const auto sp = p.second->face.image.pixels();
    if (fp.size() != dim || sp.size() != dim) throw ShapeError("batch: image sizes differ");
    prepare_input(fp, input_std, b.first_inputs.row(i));
    prepare_input(sp, input_std, b.second_inputs.row(i));
    const auto a1 = allocate_labels(p.first->labels, p.first->kind, variant, num_identities);
    const auto a2 = allocate_labels(p.second->labels, p.second->kind, variant, num_identities);
    b.labels.push_back({a1.first_class, a2.second_class});
    b.t.push_back(p.t());
  }
  return b;
}

struct BatchLoss {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double total = 0.0;
  double t_ratio = 0.0;
};

/// Mean fused loss over the batch (1/N sums). When `grads` is given it must be
/// zeros_like(model); gradients are accumulated into it.
inline BatchLoss fused_batch_loss(const DualModel& model, const PairBatch& batch,
                                  const LossWeights& weights, DualModel* grads = nullptr) {
  const std::size_t n = batch.labels.size();
  BatchCache c1, c2;
  const Tensor2 f1 = model.first_backbone.forward_batch(batch.first_inputs, grads ? &c1 : nullptr);
  const Tensor2 f2 = model.second_backbone.forward_batch(batch.second_inputs, grads ? &c2 : nullptr);
  Tensor2 g1(n, f1.cols()), g2(n, f2.cols());
  PairLossGrads pg;
  if (grads) {
    pg.first_head = &grads->first_head;
    pg.second_head = &grads->second_head;
  }
  BatchLoss out;
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = pair_loss(f1.row(i), f2.row(i), model.first_head, model.second_head,
                             batch.labels[i], batch.t[i], weights, model.variant,
                             grads ? &pg : nullptr, scale, model.normalize_features);
    out.l1 += r.l1;
    out.l2 += r.l2;
    out.l3 += r.l3;
    out.total += r.total;
    out.t_ratio += r.t;
    if (grads) {
      std::copy(pg.first_feat.begin(), pg.first_feat.end(), g1.row(i).begin());
      std::copy(pg.second_feat.begin(), pg.second_feat.end(), g2.row(i).begin());
    }
  }
  out.l1 *= scale;
  out.l2 *= scale;
  out.l3 *= scale;
  out.total *= scale;
  out.t_ratio *= scale;
  if (grads) {
    model.first_backbone.backward_batch(c1, g1, grads->first_backbone);
    model.second_backbone.backward_batch(c2, g2, grads->second_backbone);
  }
  return out;
}

struct StepRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double total = 0.0;
  double t_ratio = 0.0;
};

struct TrainReport {
  std::vector<StepRecord> steps;
  std::string checkpoint;
  std::vector<std::pair<std::string, std::string>> config;
  std::uint64_t seed = 0;

  /// step,lr,l1,l2,l3,total,t_ratio
  std::string to_csv() const {
    std::ostringstream os;
    os << "step,lr,l1,l2,l3,total,t_ratio\n";
    for (const auto& r : steps) {
      os << r.step << ',' << format_exact(r.lr) << ',' << format_exact(r.l1) << ','
         << format_exact(r.l2) << ',' << format_exact(r.l3) << ',' << format_exact(r.total) << ','
         << format_exact(r.t_ratio) << '\n';
    }
    return os.str();
  }
};

struct TrainOptions {
  LossWeights weights;
  /// Called after every step; used for progress output.
  std::function<void(const StepRecord&, std::size_t total_steps)> on_step;
};

struct TrainResult {
  DualModel model;
  TrainReport report;
};

/// Runs epochs * floor(|corpus| / batch) steps; the learning rate reaches
/// lr_end on the final step. Deterministic in `seed`.
inline TrainResult train(const Corpus& corpus, const ModelConfig& model_config, SgdConfig sgd,
                         Variant variant, std::uint64_t seed, const TrainOptions& options = {}) {
  PairSampler sampler(corpus, sgd.batch_size, derive_seed(seed, "sampler"));
  sgd.total_steps = sgd.epochs * sampler.steps_per_epoch();
  sgd.validate();

  TrainResult result{DualModel::create(model_config, variant, derive_seed(seed, "init")), {}};
  DualModel& model = result.model;
  result.report.seed = seed;
  DualModel velocity = model.zeros_like();
  DualModel grads = model.zeros_like();

  for (std::size_t step = 0; step < sgd.total_steps; ++step) {
    const auto pairs = sampler.sample_batch(step);
    const auto batch = make_pair_batch(pairs, variant, model.num_identities, model.input_std);
    grads.first_backbone.set_zero();
    grads.second_backbone.set_zero();
    grads.first_head = model.first_head.zeros_like();
    grads.second_head = model.second_head.zeros_like();
    const BatchLoss loss = fused_batch_loss(model, batch, options.weights, &grads);
    if (!std::isfinite(loss.total)) {
      std::ostringstream os;
      os << "training diverged at step " << step << " (batch:";
      for (const auto& p : pairs) os << ' ' << p.first->path << '|' << p.second->path;
      os << ")";
      throw NumericError(os.str());
    }
    auto params = model.parameter_blocks();
    auto g = grads.parameter_blocks();
    auto v = velocity.parameter_blocks();
    for (std::size_t i = 0; i < params.size(); ++i) sgd_step(params[i], g[i], v[i], step, sgd);

    StepRecord rec{step, learning_rate(sgd, step), loss.l1, loss.l2, loss.l3, loss.total, loss.t_ratio};
    result.report.steps.push_back(rec);
    if (options.on_step) options.on_step(rec, sgd.total_steps);
  }
  return result;
}

/// Stand-alone identity model used as the face recognition signal for score
/// fusion: one backbone plus a softmax head over bona fide identities.
struct FrModel {
  MlpBackbone backbone;
  ClassifierHead head;
  double input_std = 0.25;

  bool operator==(const FrModel&) const = default;
};

inline FrModel train_fr_model(const Corpus& corpus, const ModelConfig& model_config, SgdConfig sgd,
                              std::uint64_t seed) {
  std::vector<const LabeledSample*> pool;
  for (const auto& s : corpus) {
    if (!is_morph(s.kind)) pool.push_back(&s);
  }
  if (pool.size() < sgd.batch_size) throw ConfigError("fr: not enough bona fide samples");
  const std::size_t per_epoch = pool.size() / sgd.batch_size;
  sgd.total_steps = sgd.epochs * per_epoch;
  sgd.validate();

  Rng init = make_rng(seed, "fr-init");
  FrModel model{MlpBackbone::glorot(model_config.dims(), model_config.hidden_activation, init), {},
                model_config.input_std};
  model.head = ClassifierHead::glorot(model_config.num_identities, model_config.feature_dim, init);
  MlpBackbone gb = model.backbone.zeros_like(), vb = model.backbone.zeros_like();
  ClassifierHead gh = model.head.zeros_like(), vh = model.head.zeros_like();

  std::vector<std::size_t> order(pool.size());
  const std::size_t dim = model_config.input_dim;
  for (std::size_t step = 0; step < sgd.total_steps; ++step) {
    if (step % per_epoch == 0) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng rng = make_rng(seed, "fr-epoch", step / per_epoch);
      shuffle(order.begin(), order.end(), rng);
    }
    const std::size_t offset = (step % per_epoch) * sgd.batch_size;
    Tensor2 x(sgd.batch_size, dim);
    for (std::size_t i = 0; i < sgd.batch_size; ++i) {
      prepare_input(pool[order[offset + i]]->face.image.pixels(), model.input_std, x.row(i));
    }
    gb.set_zero();
    gh = model.head.zeros_like();
    BatchCache cache;
    const Tensor2 f = model.backbone.forward_batch(x, &cache);
    Tensor2 gf(f.rows(), f.cols());
    const double scale = 1.0 / static_cast<double>(sgd.batch_size);
    double total = 0.0;
    for (std::size_t i = 0; i < sgd.batch_size; ++i) {
      const auto ce = softmax_cross_entropy(model.head.logits(f.row(i)), pool[order[offset + i]]->labels.y1);
      total += ce.loss;
      for (std::size_t c = 0; c < ce.grad_logits.size(); ++c) {
        const double g = scale * ce.grad_logits[c];
        axpy(g, f.row(i), gh.weights.row(c));
        gh.biases[c] += g;
        axpy(g, model.head.weights.row(c), gf.row(i));
      }
    }
    if (!std::isfinite(total)) throw NumericError("fr training diverged at step " + std::to_string(step));
    model.backbone.backward_batch(cache, gf, gb);
    auto p = model.backbone.parameter_blocks();
    auto g = gb.parameter_blocks();
    auto v = vb.parameter_blocks();
    for (std::size_t i = 0; i < p.size(); ++i) sgd_step(p[i], g[i], v[i], step, sgd);
    auto ph = model.head.parameter_blocks();
    auto ghb = gh.parameter_blocks();
    auto vhb = vh.parameter_blocks();
    for (std::size_t i = 0; i < ph.size(); ++i) sgd_step(ph[i], ghb[i], vhb[i], step, sgd);
  }
  return model;
}

/// Cosine similarity of FR features mapped to [0, 1] by (1 + cos) / 2.
inline double fr_similarity(const FrModel& fr, const GrayImage& a, const GrayImage& b) {
  const Vector fa = fr.backbone.forward(prepare_input(a.pixels(), fr.input_std));
  const Vector fb = fr.backbone.forward(prepare_input(b.pixels(), fr.input_std));
  const double denom = std::sqrt(dot(fa, fa) * dot(fb, fb));
  if (!(denom > 0.0)) return 0.5;
  return std::clamp((1.0 + dot(fa, fb) / denom) / 2.0, 0.0, 1.0);
}

struct SeparationStat {
  std::optional<double> first;   // nullopt when all centroids coincide
  std::optional<double> second;

  /// Mean of the two networks' ratios; nullopt if either is degenerate.
  std::optional<double> mean() const {
    if (!first || !second) return std::nullopt;
    return (*first + *second) / 2.0;
  }
};

/// For each network: mean distance from a morph's features to the bona fide
/// centroid of its own class (y1 for First, y2 for Second), divided by the
/// mean distance between class centroids.
inline SeparationStat morph_separation_stat(const DualModel& model, const std::vector<LabeledSample>& eval) {
  SeparationStat out;
  for (Network net : {Network::First, Network::Second}) {
    std::map<std::size_t, std::pair<Vector, std::size_t>> sums;
    std::vector<std::pair<std::size_t, Vector>> morph_feats;
    for (const auto& s : eval) {
      if (is_morph(s.kind)) {
        const std::size_t cls = net == Network::First ? s.labels.y1 : s.labels.y2;
        morph_feats.emplace_back(cls, extract_features(model, s.face.image, net));
      } else if (s.kind == SampleKind::BonaFide) {
        Vector f = extract_features(model, s.face.image, net);
        auto& [sum, count] = sums[s.labels.y1];
        if (sum.empty()) sum.assign(f.size(), 0.0);
        axpy(1.0, f, sum);
        ++count;
      }
    }
    std::map<std::size_t, Vector> centroids;
    for (auto& [cls, sc] : sums) {
      Vector c = sc.first;
      for (double& v : c) v /= static_cast<double>(sc.second);
      centroids.emplace(cls, std::move(c));
    }
    auto dist = [](const Vector& a, const Vector& b) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return std::sqrt(s);
    };
    double inter = 0.0;
    std::size_t pairs = 0;
    for (auto i = centroids.begin(); i != centroids.end(); ++i) {
      for (auto j = std::next(i); j != centroids.end(); ++j) {
        inter += dist(i->second, j->second);
        ++pairs;
      }
    }
    double intra = 0.0;
    for (const auto& [cls, f] : morph_feats) {
      const auto it = centroids.find(cls);
      if (it == centroids.end()) {
        throw CoverageError("separation: no bona fide samples for class " + std::to_string(cls));
      }
      intra += dist(f, it->second);
    }
    if (morph_feats.empty()) throw CoverageError("separation: eval set has no morphs");
    std::optional<double> ratio;
    if (pairs > 0 && inter > 0.0) {
      ratio = (intra / static_cast<double>(morph_feats.size())) / (inter / static_cast<double>(pairs));
    }
    (net == Network::First ? out.first : out.second) = ratio;
  }
  return out;
}

}  // namespace fcmad
