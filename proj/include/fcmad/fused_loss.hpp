#pragma once

// Fused classification objective for a (suspect, trusted) image pair:
// identity softmax losses on each network's head plus a binary cross-label
// loss on the dot product of the two feature vectors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>

#include "fcmad/error.hpp"
#include "fcmad/kinds.hpp"
#include "fcmad/nn.hpp"

namespace fcmad {

/// BC trains on the pair loss alone. FC_V1 labels a morph by its source
/// identities; FC_V2 moves morphs into a second block of C classes.
enum class Variant { BC, FC_V1, FC_V2 };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::BC: return "bc";
    case Variant::FC_V1: return "fc-v1";
    case Variant::FC_V2: return "fc-v2";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "bc") return Variant::BC;
  if (s == "fc-v1") return Variant::FC_V1;
  if (s == "fc-v2") return Variant::FC_V2;
  throw ConfigError("unknown variant '" + s + "' (expected bc, fc-v1 or fc-v2)");
}

inline std::size_t head_classes(Variant v, std::size_t num_identities) {
  return v == Variant::FC_V2 ? 2 * num_identities : num_identities;
}

/// 0 iff the two second-labels agree.
inline int cross_label(std::size_t y2_first, std::size_t y2_second) {
  return y2_first == y2_second ? 0 : 1;
}

struct AllocatedLabels {
  std::size_t first_class = 0;
  std::size_t second_class = 0;

  bool operator==(const AllocatedLabels&) const = default;
};

/// Head class indices for a sample. Only FC_V2 morphs are shifted by C.
inline AllocatedLabels allocate_labels(DualLabels labels, SampleKind kind, Variant variant,
                                       std::size_t num_identities) {
  if (labels.y1 >= num_identities || labels.y2 >= num_identities) {
    throw RangeError("allocate_labels: labels (" + std::to_string(labels.y1) + ", " +
                     std::to_string(labels.y2) + ") outside [0, " +
                     std::to_string(num_identities) + ")");
  }
  if (variant == Variant::FC_V2 && is_morph(kind)) {
    return {labels.y1 + num_identities, labels.y2 + num_identities};
  }
  return {labels.y1, labels.y2};
}

struct LossWeights {
  double first_identity = 1.0;
  double second_identity = 1.0;
  double binary = 1.0;  // lambda on the pair loss

  /// BC zeroes the identity terms on the same graph.
  LossWeights effective(Variant v) const {
    if (v == Variant::BC) return {0.0, 0.0, binary};
    return *this;
  }
};

struct PairLossBreakdown {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double total = 0.0;
  int t = 0;
  double dot = 0.0;
};

/// Gradient sinks for pair_loss. Feature gradients are overwritten; head
/// gradients accumulate so a batch can share one pair of head buffers.
struct PairLossGrads {
  Vector first_feat;
  Vector second_feat;
  ClassifierHead* first_head = nullptr;
  ClassifierHead* second_head = nullptr;
};

/// -[t log s(D) + (1 - t) log(1 - s(D))] = softplus(D) - t D.
inline double binary_pair_loss(double d, int t) {
  return std::max(d, 0.0) - d * t + std::log1p(std::exp(-std::abs(d)));
}

/// D: the plain dot product, or the cosine when `normalize` is set.
inline double pair_dot(std::span<const double> first_feat, std::span<const double> second_feat,
                       bool normalize = false) {
  if (!normalize) return dot(first_feat, second_feat);
  return dot(l2_normalize(first_feat), l2_normalize(second_feat));
}

inline double detection_score(std::span<const double> first_feat,
                              std::span<const double> second_feat, bool normalize = false) {
  return sigmoid(pair_dot(first_feat, second_feat, normalize));
}

namespace detail {

inline double head_loss(const ClassifierHead& head, std::span<const double> feat,
                        std::size_t label, double weight, double scale, ClassifierHead* head_grad,
                        Vector* feat_grad) {
  const auto logits = head.logits(feat);
  const auto ce = softmax_cross_entropy(logits, label);
  if (feat_grad && weight != 0.0) {
    const double s = weight * scale;
    for (std::size_t c = 0; c < ce.grad_logits.size(); ++c) {
      const double g = s * ce.grad_logits[c];
      if (head_grad) {
        axpy(g, feat, head_grad->weights.row(c));
        head_grad->biases[c] += g;
      }
      axpy(g, head.weights.row(c), *feat_grad);
    }
  }
  return ce.loss;
}

}  // namespace detail

/// One pair's contribution. `scale` multiplies every gradient (1/N for a batch
/// mean). Under BC, l1 = l2 = 0 and no identity gradient is produced.
inline PairLossBreakdown pair_loss(std::span<const double> first_feat,
                                   std::span<const double> second_feat,
                                   const ClassifierHead& first_head,
                                   const ClassifierHead& second_head, AllocatedLabels alloc,
                                   int t, const LossWeights& weights, Variant variant,
                                   PairLossGrads* grads = nullptr, double scale = 1.0,
                                   bool normalize_dot = false) {
  if (first_feat.size() != second_feat.size()) {
    throw ShapeError("pair_loss: feature dims differ");
  }
  if (!all_finite(first_feat) || !all_finite(second_feat)) {
    throw NumericError("pair_loss: non-finite feature");
  }
  if (t != 0 && t != 1) throw RangeError("pair_loss: cross label must be 0 or 1");
  const LossWeights w = weights.effective(variant);

  PairLossBreakdown out;
  out.t = t;
  if (grads) {
    grads->first_feat.assign(first_feat.size(), 0.0);
    grads->second_feat.assign(second_feat.size(), 0.0);
  }
  if (variant != Variant::BC) {
    out.l1 = detail::head_loss(first_head, first_feat, alloc.first_class, w.first_identity, scale,
                               grads ? grads->first_head : nullptr,
                               grads ? &grads->first_feat : nullptr);
    out.l2 = detail::head_loss(second_head, second_feat, alloc.second_class, w.second_identity,
                               scale, grads ? grads->second_head : nullptr,
                               grads ? &grads->second_feat : nullptr);
  }
  out.dot = pair_dot(first_feat, second_feat, normalize_dot);
  out.l3 = binary_pair_loss(out.dot, t);
  out.total = w.first_identity * out.l1 + w.second_identity * out.l2 + w.binary * out.l3;
  if (grads) {
    const double g = w.binary * scale * (sigmoid(out.dot) - t);
    if (normalize_dot) {
      const Vector u1 = l2_normalize(first_feat);
      const Vector u2 = l2_normalize(second_feat);
      Vector g1(u2.size()), g2(u1.size());
      axpy(g, u2, g1);
      axpy(g, u1, g2);
      axpy(1.0, l2_normalize_backward(first_feat, g1), grads->first_feat);
      axpy(1.0, l2_normalize_backward(second_feat, g2), grads->second_feat);
    } else {
      axpy(g, second_feat, grads->first_feat);
      axpy(g, first_feat, grads->second_feat);
    }
  }
  return out;
}

}  // namespace fcmad
