#pragma once

// Built-in verification: finite-difference checks of the fused loss gradient
// and a brute-force cross-check of the error-rate metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "fcmad/evalbench.hpp"
#include "fcmad/fused_loss.hpp"
#include "fcmad/nn.hpp"
#include "fcmad/random.hpp"
#include "fcmad/trainer.hpp"

namespace fcmad {

struct GradCheckSetup {
  std::size_t input_dim = 12;
  std::vector<std::size_t> hidden{8};
  std::size_t feature_dim = 6;
  std::size_t num_identities = 4;
  std::size_t batch = 5;
  Activation activation = Activation::Relu;
  bool normalize_features = false;
  LossWeights weights;
  double epsilon = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t parameters = 0;
};

/// A seeded random model and batch for `variant`.
inline std::pair<DualModel, PairBatch> grad_check_instance(Variant variant, std::uint64_t seed,
                                                           const GradCheckSetup& s = {}) {
  ModelConfig cfg;
  cfg.input_dim = s.input_dim;
  cfg.hidden = s.hidden;
  cfg.feature_dim = s.feature_dim;
  cfg.hidden_activation = s.activation;
  cfg.normalize_features = s.normalize_features;
  cfg.num_identities = s.num_identities;
  DualModel model = DualModel::create(cfg, variant, derive_seed(seed, "model"));
  // Larger biases keep ReLU pre-activations away from the kink.
  Rng rng = make_rng(seed, "batch");
  for (auto* bb : {&model.first_backbone, &model.second_backbone}) {
    for (auto block : bb->parameter_blocks()) {
      for (double& v : block) v += 0.05 * normal(rng);
    }
  }
  PairBatch batch{Tensor2(s.batch, s.input_dim), Tensor2(s.batch, s.input_dim), {}, {}};
  for (double& v : batch.first_inputs.values()) v = normal(rng);
  for (double& v : batch.second_inputs.values()) v = normal(rng);
  const std::size_t classes = head_classes(variant, s.num_identities);
  for (std::size_t i = 0; i < s.batch; ++i) {
    batch.labels.push_back({uniform_index(rng, classes), uniform_index(rng, classes)});
    batch.t.push_back(static_cast<int>(uniform_index(rng, 2)));
  }
  return {std::move(model), std::move(batch)};
}

/// Max relative error between analytic and central-difference gradients of
/// the batch loss. `corrupt` doubles one analytic coordinate first.
inline GradCheckResult fused_gradient_check(Variant variant, std::uint64_t seed, const GradCheckSetup& s = {},
                                            bool corrupt = false) {
  auto [model, batch] = grad_check_instance(variant, seed, s);
  DualModel grads = model.zeros_like();
  fused_batch_loss(model, batch, s.weights, &grads);
  auto values = model.parameter_blocks();
  auto g = grads.parameter_blocks();
  if (corrupt) {
    // The largest coordinate, so the corruption is always visible.
    double* worst = nullptr;
    for (auto block : g) {
      for (double& v : block) {
        if (!worst || std::abs(v) > std::abs(*worst)) worst = &v;
      }
    }
    if (worst) *worst = *worst * 2.0 + (*worst == 0.0 ? 1.0 : 0.0);
  }
  std::vector<ParamRef> refs;
  GradCheckResult out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    refs.push_back({values[i], g[i]});
    out.parameters += values[i].size();
  }
  const DualModel* m = &model;
  const PairBatch* b = &batch;
  const LossWeights w = s.weights;
  out.max_rel_error = finite_diff_check([m, b, w] { return fused_batch_loss(*m, *b, w).total; }, refs, s.epsilon);
  return out;
}

namespace oracle {

/// APCER/BPCER straight from the definitions.
inline ErrorRates rates(const std::vector<double>& s, const std::vector<GroundTruth>& t, double tau) {
  double morph = 0, bona = 0, miss = 0, false_alarm = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (t[i] == GroundTruth::Morph) {
      ++morph;
      if (s[i] < tau) ++miss;
    } else {
      ++bona;
      if (s[i] >= tau) ++false_alarm;
    }
  }
  return {miss / morph, false_alarm / bona};
}

/// Smallest candidate threshold meeting the BPCER target, by exhaustive scan.
inline OperatingPoint at_bpcer(const std::vector<double>& s, const std::vector<GroundTruth>& t, double delta) {
  std::vector<double> cands = s;
  cands.push_back(std::numeric_limits<double>::infinity());
  double best = std::numeric_limits<double>::infinity();
  for (double c : cands) {
    if (rates(s, t, c).bpcer <= delta) best = std::min(best, c);
  }
  const auto r = rates(s, t, best);
  return {r.apcer, r.bpcer, best};
}

}  // namespace oracle

struct MetricCheckResult {
  std::size_t sets = 0;
  std::size_t mismatches = 0;
};

/// Compares apcer_bpcer, apcer_at_bpcer and det_curve with the brute-force
/// oracle on `sets` seeded random score sets of up to `max_n` entries.
inline MetricCheckResult metric_oracle_check(std::size_t sets, std::uint64_t seed, std::size_t max_n = 500) {
  MetricCheckResult out;
  for (std::size_t k = 0; k < sets; ++k) {
    Rng rng = make_rng(seed, "metric-set", k);
    const std::size_t n = 2 + uniform_index(rng, max_n - 1);
    std::vector<double> s(n);
    std::vector<GroundTruth> t(n);
    t[0] = GroundTruth::BonaFide;
    t[1] = GroundTruth::Morph;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid so ties are common.
      s[i] = std::round(uniform01(rng) * 50.0) / 50.0;
      if (i >= 2) t[i] = uniform01(rng) < 0.3 ? GroundTruth::BonaFide : GroundTruth::Morph;
    }
    bool ok = true;
    for (double tau : {s[uniform_index(rng, n)], 0.5, -1.0, 2.0}) {
      const auto a = apcer_bpcer(s, t, tau);
      const auto b = oracle::rates(s, t, tau);
      ok = ok && a.apcer == b.apcer && a.bpcer == b.bpcer;
    }
    for (double delta : {0.005, 0.01, 0.1, 0.5, 0.99}) {
      const auto a = apcer_at_bpcer(s, t, delta);
      const auto b = oracle::at_bpcer(s, t, delta);
      ok = ok && a.apcer == b.apcer && a.bpcer == b.bpcer && a.threshold == b.threshold;
    }
    const auto det = det_curve(s, t);
    for (const auto& p : det) {
      const auto b = oracle::rates(s, t, p.threshold);
      ok = ok && p.apcer == b.apcer && p.bpcer == b.bpcer;
    }
    std::vector<double> uniq = s;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    ok = ok && det.size() == uniq.size() + 1;
    ++out.sets;
    if (!ok) ++out.mismatches;
  }
  return out;
}

}  // namespace fcmad
