#pragma once

// Dense network machinery: row-major matrices, an MLP backbone with manual
// backprop, a linear classifier head, softmax / sigmoid losses, SGD with
// momentum on a linear learning-rate schedule, and a central-difference
// gradient checker.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fcmad/error.hpp"
#include "fcmad/random.hpp"

namespace fcmad {

using Vector = std::vector<double>;

class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2(std::size_t rows, std::size_t cols, Vector data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("Tensor2: data length " + std::to_string(data_.size()) +
                       " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor2&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

// Four independent partial sums; fixed order, so results are reproducible.
inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: length mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  const std::size_t n = a.size();
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  double* __restrict yp = y.data();
  const double* __restrict xp = x.data();
  for (std::size_t i = 0; i < n; ++i) yp[i] += alpha * xp[i];
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

enum class Activation { Linear, Relu, LeakyRelu, Tanh };

inline constexpr double kLeakySlope = 0.01;

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky-relu";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::Linear;
  if (s == "relu") return Activation::Relu;
  if (s == "leaky-relu") return Activation::LeakyRelu;
  if (s == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + s + "'");
}

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::Relu: return z > 0 ? z : 0.0;
    case Activation::LeakyRelu: return z > 0 ? z : kLeakySlope * z;
    case Activation::Tanh: return std::tanh(z);
    case Activation::Linear: break;
  }
  return z;
}

/// Derivative expressed through the pre-activation value.
inline double activate_grad(Activation a, double z) {
  switch (a) {
    case Activation::Relu: return z > 0 ? 1.0 : 0.0;
    case Activation::LeakyRelu: return z > 0 ? 1.0 : kLeakySlope;
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::Linear: break;
  }
  return 1.0;
}

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline void glorot_fill(Tensor2& w, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (double& v : w.values()) v = uniform(rng, -a, a);
}

struct DenseLayer {
  Tensor2 weights;  // out x in
  Vector biases;    // out
  Activation activation = Activation::Linear;

  std::size_t in_dim() const { return weights.cols(); }
  std::size_t out_dim() const { return weights.rows(); }

  bool operator==(const DenseLayer&) const = default;
};

/// Per-layer activations kept from a batched forward pass for backprop.
struct BatchCache {
  std::vector<Tensor2> inputs;  // input to layer k, N x in_k
  std::vector<Tensor2> pre;     // pre-activation of layer k, N x out_k
};

/// Feature extractor: a chain of dense layers. The last layer is linear and
/// its width is the feature dimension.
class MlpBackbone {
 public:
  MlpBackbone() = default;

  explicit MlpBackbone(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ShapeError("MlpBackbone: no layers");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      if (l.biases.size() != l.out_dim()) throw ShapeError("MlpBackbone: bias length mismatch");
      if (k > 0 && layers_[k - 1].out_dim() != l.in_dim()) {
        throw ShapeError("MlpBackbone: layer " + std::to_string(k) + " input " +
                         std::to_string(l.in_dim()) + " does not chain with previous output " +
                         std::to_string(layers_[k - 1].out_dim()));
      }
    }
  }

  /// dims = {input, hidden..., feature}. Hidden layers use `hidden`; the final
  /// layer is linear. Biases start at zero.
  static MlpBackbone glorot(std::span<const std::size_t> dims, Activation hidden, Rng& rng) {
    if (dims.size() < 2) throw ShapeError("MlpBackbone: need at least input and feature dims");
    std::vector<DenseLayer> layers;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
      DenseLayer l{Tensor2(dims[k + 1], dims[k]), Vector(dims[k + 1], 0.0),
                   k + 2 == dims.size() ? Activation::Linear : hidden};
      glorot_fill(l.weights, rng);
      layers.push_back(std::move(l));
    }
    return MlpBackbone(std::move(layers));
  }

  std::size_t input_dim() const { return layers_.front().in_dim(); }
  std::size_t feature_dim() const { return layers_.back().out_dim(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.biases.size();
    return n;
  }

  MlpBackbone zeros_like() const {
    auto copy = *this;
    copy.set_zero();
    return copy;
  }

  void set_zero() {
    for (auto& l : layers_) {
      l.weights.fill(0.0);
      std::fill(l.biases.begin(), l.biases.end(), 0.0);
    }
  }

  std::vector<std::span<double>> parameter_blocks() {
    std::vector<std::span<double>> out;
    for (auto& l : layers_) {
      out.push_back(l.weights.values());
      out.push_back(l.biases);
    }
    return out;
  }

  std::vector<std::span<const double>> parameter_blocks() const {
    std::vector<std::span<const double>> out;
    for (const auto& l : layers_) {
      out.push_back(l.weights.values());
      out.push_back(l.biases);
    }
    return out;
  }

  Vector forward(std::span<const double> input) const {
    Tensor2 x(1, input.size(), Vector(input.begin(), input.end()));
    Tensor2 y = forward_batch(x, nullptr);
    auto r = y.row(0);
    return Vector(r.begin(), r.end());
  }

  /// Row n of `x` is one input. Returns N x feature_dim.
  Tensor2 forward_batch(const Tensor2& x, BatchCache* cache) const {
    if (x.cols() != input_dim()) {
      throw ShapeError("forward: input dim " + std::to_string(x.cols()) + " != backbone input " +
                       std::to_string(input_dim()));
    }
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
    }
    Tensor2 cur = x;
    for (const auto& l : layers_) {
      Tensor2 z(cur.rows(), l.out_dim());
      for (std::size_t o = 0; o < l.out_dim(); ++o) {
        const auto w = l.weights.row(o);
        for (std::size_t n = 0; n < cur.rows(); ++n) z(n, o) = dot(cur.row(n), w) + l.biases[o];
      }
      Tensor2 a = z;
      if (l.activation != Activation::Linear) {
        for (double& v : a.values()) v = activate(l.activation, v);
      }
      if (cache) {
        cache->inputs.push_back(std::move(cur));
        cache->pre.push_back(std::move(z));
      }
      cur = std::move(a);
    }
    return cur;
  }

  /// Accumulates dLoss/dparams into `grads` (same shape as *this). When
  /// `grad_input` is non-null it receives dLoss/dinput.
  void backward_batch(const BatchCache& cache, const Tensor2& grad_out, MlpBackbone& grads,
                      Tensor2* grad_input = nullptr) const {
    if (cache.pre.size() != layers_.size()) throw ShapeError("backward: stale cache");
    if (grad_out.cols() != feature_dim() || grad_out.rows() != cache.pre.back().rows()) {
      throw ShapeError("backward: gradient shape mismatch");
    }
    Tensor2 delta = grad_out;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const auto& l = layers_[k];
      auto& g = grads.layers_[k];
      const Tensor2& z = cache.pre[k];
      if (l.activation != Activation::Linear) {
        auto dv = delta.values();
        auto zv = z.values();
        for (std::size_t i = 0; i < dv.size(); ++i) dv[i] *= activate_grad(l.activation, zv[i]);
      }
      const Tensor2& in = cache.inputs[k];
      for (std::size_t o = 0; o < l.out_dim(); ++o) {
        auto gw = g.weights.row(o);
        double gb = 0.0;
        for (std::size_t n = 0; n < delta.rows(); ++n) {
          const double d = delta(n, o);
          if (d == 0.0) continue;
          axpy(d, in.row(n), gw);
          gb += d;
        }
        g.biases[o] += gb;
      }
      if (k == 0 && grad_input == nullptr) break;
      Tensor2 prev(delta.rows(), l.in_dim());
      for (std::size_t n = 0; n < delta.rows(); ++n) {
        auto pr = prev.row(n);
        for (std::size_t o = 0; o < l.out_dim(); ++o) {
          const double d = delta(n, o);
          if (d != 0.0) axpy(d, l.weights.row(o), pr);
        }
      }
      delta = std::move(prev);
    }
    if (grad_input) *grad_input = std::move(delta);
  }

  bool operator==(const MlpBackbone&) const = default;

 private:
  std::vector<DenseLayer> layers_;
};

/// Last fully connected layer: logits = W f + b.
struct ClassifierHead {
  Tensor2 weights;  // num_classes x feature_dim
  Vector biases;    // num_classes

  static ClassifierHead glorot(std::size_t num_classes, std::size_t feature_dim, Rng& rng) {
    ClassifierHead h{Tensor2(num_classes, feature_dim), Vector(num_classes, 0.0)};
    glorot_fill(h.weights, rng);
    return h;
  }

  std::size_t num_classes() const { return weights.rows(); }
  std::size_t feature_dim() const { return weights.cols(); }

  Vector logits(std::span<const double> feature) const {
    if (feature.size() != feature_dim()) {
      throw ShapeError("head: feature dim " + std::to_string(feature.size()) + " != " +
                       std::to_string(feature_dim()));
    }
    Vector z(num_classes());
    for (std::size_t c = 0; c < z.size(); ++c) z[c] = dot(weights.row(c), feature) + biases[c];
    return z;
  }

  ClassifierHead zeros_like() const {
    return {Tensor2(weights.rows(), weights.cols()), Vector(biases.size(), 0.0)};
  }

  std::vector<std::span<double>> parameter_blocks() { return {weights.values(), biases}; }
  std::vector<std::span<const double>> parameter_blocks() const {
    return {weights.values(), biases};
  }

  bool operator==(const ClassifierHead&) const = default;
};

struct CrossEntropy {
  double loss = 0.0;
  Vector grad_logits;
};

/// -log softmax(z)[label] with max-subtraction; gradient is softmax - onehot.
inline CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  if (logits.empty()) throw ShapeError("softmax_cross_entropy: empty logits");
  if (label >= logits.size()) {
    throw RangeError("softmax_cross_entropy: label " + std::to_string(label) +
                     " out of range for " + std::to_string(logits.size()) + " classes");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  CrossEntropy out;
  out.grad_logits.resize(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out.grad_logits[j] = std::exp(logits[j] - m);
    sum += out.grad_logits[j];
  }
  out.loss = std::log(sum) - (logits[label] - m);
  for (double& g : out.grad_logits) g /= sum;
  out.grad_logits[label] -= 1.0;
  return out;
}

/// f = g / |g| and its backward pass.
inline Vector l2_normalize(std::span<const double> g) {
  const double n = std::sqrt(dot(g, g));
  if (!(n > 0.0)) throw NumericError("l2_normalize: zero vector");
  Vector f(g.begin(), g.end());
  for (double& v : f) v /= n;
  return f;
}

/// Given g and dL/df for f = g/|g|, returns dL/dg = (df - f (f . df)) / |g|.
inline Vector l2_normalize_backward(std::span<const double> g, std::span<const double> grad_f) {
  const double n = std::sqrt(dot(g, g));
  if (!(n > 0.0)) throw NumericError("l2_normalize: zero vector");
  Vector out(g.size());
  double fd = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) fd += g[i] / n * grad_f[i];
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = (grad_f[i] - g[i] / n * fd) / n;
  return out;
}

struct SgdConfig {
  double momentum = 0.9;
  double lr_start = 0.01;
  double lr_end = 0.0001;
  std::size_t total_steps = 1;
  std::size_t batch_size = 28;
  std::size_t epochs = 5;

  void validate() const {
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("sgd: momentum must be in [0, 1)");
    if (!(lr_start >= 0.0 && lr_end >= 0.0) || !std::isfinite(lr_start) || !std::isfinite(lr_end)) {
      throw ConfigError("sgd: learning rates must be finite and >= 0");
    }
    if (total_steps < 1) throw ConfigError("sgd: total_steps must be >= 1");
    if (batch_size < 1) throw ConfigError("sgd: batch_size must be >= 1");
  }
};

/// Linear interpolation lr_start -> lr_end over [0, total_steps - 1].
inline double learning_rate(const SgdConfig& cfg, std::size_t step) {
  if (cfg.total_steps <= 1) return cfg.lr_start;
  const double frac = static_cast<double>(std::min(step, cfg.total_steps - 1)) /
                      static_cast<double>(cfg.total_steps - 1);
  if (frac == 1.0) return cfg.lr_end;
  return cfg.lr_start + (cfg.lr_end - cfg.lr_start) * frac;
}

/// velocity <- momentum * velocity - lr(step) * grad; param <- param + velocity.
inline void sgd_step(std::span<double> params, std::span<const double> grads,
                     std::span<double> velocity, std::size_t step, const SgdConfig& cfg) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw ShapeError("sgd_step: params/grads/velocity lengths differ");
  }
  if (step >= cfg.total_steps) {
    throw RangeError("sgd_step: step " + std::to_string(step) + " >= total_steps " +
                     std::to_string(cfg.total_steps));
  }
  const double lr = learning_rate(cfg, step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = cfg.momentum * velocity[i] - lr * grads[i];
    params[i] += velocity[i];
  }
}

/// A parameter block paired with its analytic gradient.
struct ParamRef {
  std::span<double> value;
  std::span<const double> grad;
};

/// Central differences on every coordinate of every block, compared against the
/// analytic gradient. Relative error is |a - n| / max(1, |a|, |n|). Parameters
/// are restored afterwards.
inline double finite_diff_check(const std::function<double()>& loss,
                                std::span<const ParamRef> params, double epsilon) {
  if (!(epsilon > 0.0)) throw RangeError("finite_diff_check: epsilon must be > 0");
  double worst = 0.0;
  for (const auto& p : params) {
    if (p.value.size() != p.grad.size()) throw ShapeError("finite_diff_check: block size mismatch");
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + epsilon;
      const double up = loss();
      p.value[i] = saved - epsilon;
      const double down = loss();
      p.value[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_check: non-finite loss");
      }
      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = p.grad[i];
      const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace fcmad
