#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fcmad/fused_loss.hpp"
#include "fcmad/selftest.hpp"

using namespace fcmad;

namespace {

ClassifierHead random_head(std::size_t classes, std::size_t dim, std::uint64_t seed) {
  Rng rng = make_rng(seed, "head");
  auto h = ClassifierHead::glorot(classes, dim, rng);
  for (double& b : h.biases) b = normal(rng);
  return h;
}

Vector random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, "vec");
  Vector v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

// Direct evaluation of -[t log s + (1 - t) log(1 - s)] in long double.
double naive_bce(double d, int t) {
  const long double s = 1.0L / (1.0L + std::exp(-static_cast<long double>(d)));
  return static_cast<double>(-(t * std::log(s) + (1 - t) * std::log(1.0L - s)));
}

}  // namespace

TEST(Labels, CrossLabelIsInequalityOfSecondLabels) {
  EXPECT_EQ(cross_label(3, 3), 0);
  EXPECT_EQ(cross_label(3, 4), 1);
}

TEST(Labels, V2ShiftsOnlyMorphs) {
  const std::size_t C = 10;
  EXPECT_EQ(allocate_labels({2, 7}, SampleKind::MorphLandmark, Variant::FC_V2, C), (AllocatedLabels{12, 17}));
  EXPECT_EQ(allocate_labels({2, 7}, SampleKind::MorphLandmark, Variant::FC_V1, C), (AllocatedLabels{2, 7}));
  EXPECT_EQ(allocate_labels({4, 4}, SampleKind::SelfmorphLatent, Variant::FC_V2, C), (AllocatedLabels{4, 4}));
  EXPECT_EQ(allocate_labels({4, 4}, SampleKind::BonaFide, Variant::FC_V2, C), (AllocatedLabels{4, 4}));
  EXPECT_THROW(allocate_labels({10, 1}, SampleKind::BonaFide, Variant::FC_V1, C), RangeError);
}

TEST(Labels, HeadWidthDoublesForV2) {
  EXPECT_EQ(head_classes(Variant::BC, 7), 7u);
  EXPECT_EQ(head_classes(Variant::FC_V1, 7), 7u);
  EXPECT_EQ(head_classes(Variant::FC_V2, 7), 14u);
}

TEST(Labels, VariantNamesRoundTrip) {
  for (Variant v : {Variant::BC, Variant::FC_V1, Variant::FC_V2}) EXPECT_EQ(variant_from_string(to_string(v)), v);
  EXPECT_THROW(variant_from_string("fc-v3"), ConfigError);
}

TEST(BinaryLoss, MatchesNaiveFormula) {
  for (double d = -20.0; d <= 20.0; d += 0.25) {
    for (int t : {0, 1}) EXPECT_NEAR(binary_pair_loss(d, t), naive_bce(d, t), 1e-9) << d << ' ' << t;
  }
}

TEST(BinaryLoss, ZeroDotIsLog2) {
  EXPECT_NEAR(binary_pair_loss(0.0, 0), std::log(2.0), 1e-12);
  EXPECT_NEAR(binary_pair_loss(0.0, 1), std::log(2.0), 1e-12);
}

TEST(BinaryLoss, MonotoneTowardsEndpoints) {
  double prev0 = binary_pair_loss(-20.0, 0), prev1 = binary_pair_loss(-20.0, 1);
  for (int i = 1; i <= 400; ++i) {
    const double d = -20.0 + 0.1 * i;
    const double l0 = binary_pair_loss(d, 0), l1 = binary_pair_loss(d, 1);
    EXPECT_GT(l0, prev0);
    EXPECT_LT(l1, prev1);
    prev0 = l0;
    prev1 = l1;
  }
  EXPECT_LT(binary_pair_loss(-20.0, 0), 1e-8);
  EXPECT_LT(binary_pair_loss(20.0, 1), 1e-8);
  EXPECT_NEAR(binary_pair_loss(-20.0, 1), 20.0, 1e-8);
  EXPECT_NEAR(binary_pair_loss(20.0, 0), 20.0, 1e-8);
  EXPECT_TRUE(std::isfinite(binary_pair_loss(1e6, 0)));
}

TEST(PairLoss, TotalIsWeightedSum) {
  const auto f1 = random_vec(5, 1), f2 = random_vec(5, 2);
  const auto h1 = random_head(8, 5, 3), h2 = random_head(8, 5, 4);
  const LossWeights w{0.7, 1.3, 2.0};
  const auto r = pair_loss(f1, f2, h1, h2, {1, 6}, 1, w, Variant::FC_V1);
  EXPECT_NEAR(r.l1, softmax_cross_entropy(h1.logits(f1), 1).loss, 1e-12);
  EXPECT_NEAR(r.l2, softmax_cross_entropy(h2.logits(f2), 6).loss, 1e-12);
  EXPECT_NEAR(r.l3, binary_pair_loss(dot(f1, f2), 1), 1e-12);
  EXPECT_NEAR(r.total, 0.7 * r.l1 + 1.3 * r.l2 + 2.0 * r.l3, 1e-12);
}

TEST(PairLoss, BaselineHasNoIdentityTermOrGradient) {
  const auto f1 = random_vec(4, 5), f2 = random_vec(4, 6);
  const auto h1 = random_head(3, 4, 7), h2 = random_head(3, 4, 8);
  ClassifierHead g1 = h1.zeros_like(), g2 = h2.zeros_like();
  PairLossGrads grads;
  grads.first_head = &g1;
  grads.second_head = &g2;
  const auto r = pair_loss(f1, f2, h1, h2, {0, 2}, 0, {}, Variant::BC, &grads);
  EXPECT_EQ(r.l1, 0.0);
  EXPECT_EQ(r.l2, 0.0);
  EXPECT_NEAR(r.total, binary_pair_loss(dot(f1, f2), 0), 1e-12);
  EXPECT_EQ(g1, h1.zeros_like());
  EXPECT_EQ(g2, h2.zeros_like());
  const double s = sigmoid(dot(f1, f2));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(grads.first_feat[i], s * f2[i], 1e-12);
    EXPECT_NEAR(grads.second_feat[i], s * f1[i], 1e-12);
  }
}

TEST(PairLoss, IdentityGradientsStayInTheirNetwork) {
  // With only L1 active, the second feature receives no gradient, and vice versa.
  const auto f1 = random_vec(4, 9), f2 = random_vec(4, 10);
  const auto h1 = random_head(3, 4, 11), h2 = random_head(3, 4, 12);
  PairLossGrads grads;
  pair_loss(f1, f2, h1, h2, {0, 2}, 1, {1.0, 0.0, 0.0}, Variant::FC_V1, &grads);
  for (double g : grads.second_feat) EXPECT_EQ(g, 0.0);
  pair_loss(f1, f2, h1, h2, {0, 2}, 1, {0.0, 1.0, 0.0}, Variant::FC_V1, &grads);
  for (double g : grads.first_feat) EXPECT_EQ(g, 0.0);
}

TEST(PairLoss, FeatureGradientsMatchFiniteDifferences) {
  for (bool normalize : {false, true}) {
    Vector f1 = random_vec(6, 13), f2 = random_vec(6, 14);
    const auto h1 = random_head(10, 6, 15), h2 = random_head(10, 6, 16);
    const LossWeights w{0.5, 1.5, 1.0};
    PairLossGrads grads;
    pair_loss(f1, f2, h1, h2, {3, 8}, 1, w, Variant::FC_V2, &grads, 1.0, normalize);
    auto total = [&] { return pair_loss(f1, f2, h1, h2, {3, 8}, 1, w, Variant::FC_V2, nullptr, 1.0, normalize).total; };
    std::vector<ParamRef> refs{{f1, grads.first_feat}, {f2, grads.second_feat}};
    EXPECT_LT(finite_diff_check(total, refs, 1e-6), 1e-7) << "normalize " << normalize;
  }
}

TEST(PairLoss, RejectsBadInputs) {
  const auto h = random_head(3, 2, 1);
  EXPECT_THROW(pair_loss(Vector{1, 2}, Vector{1, 2, 3}, h, h, {0, 0}, 0, {}, Variant::FC_V1), ShapeError);
  EXPECT_THROW(pair_loss(Vector{NAN, 2}, Vector{1, 2}, h, h, {0, 0}, 0, {}, Variant::FC_V1), NumericError);
  EXPECT_THROW(pair_loss(Vector{1, 2}, Vector{1, 2}, h, h, {0, 0}, 2, {}, Variant::FC_V1), RangeError);
}

TEST(PairLoss, CosineDotIsBounded) {
  const auto a = random_vec(8, 21), b = random_vec(8, 22);
  const double c = pair_dot(a, b, true);
  EXPECT_LE(std::abs(c), 1.0);
  EXPECT_NEAR(c, dot(a, b) / std::sqrt(dot(a, a) * dot(b, b)), 1e-12);
  EXPECT_NEAR(pair_dot(a, a, true), 1.0, 1e-12);
}

TEST(FusedGradient, AllVariantsPass) {
  for (Variant v : {Variant::BC, Variant::FC_V1, Variant::FC_V2}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto r = fused_gradient_check(v, seed);
      EXPECT_LT(r.max_rel_error, 1e-4) << to_string(v) << " seed " << seed;
      EXPECT_LE(r.parameters, 2000u);
    }
  }
}

TEST(FusedGradient, NormalizedFeaturesAndOtherActivations) {
  GradCheckSetup s;
  s.normalize_features = true;
  EXPECT_LT(fused_gradient_check(Variant::FC_V2, 4, s).max_rel_error, 1e-4);
  s.normalize_features = false;
  s.activation = Activation::Tanh;
  s.weights = {0.3, 2.0, 0.5};
  EXPECT_LT(fused_gradient_check(Variant::FC_V1, 5, s).max_rel_error, 1e-4);
}

TEST(FusedGradient, CorruptionIsDetected) {
  for (Variant v : {Variant::BC, Variant::FC_V1, Variant::FC_V2}) {
    EXPECT_GT(fused_gradient_check(v, 1, {}, true).max_rel_error, 1e-4) << to_string(v);
  }
}

TEST(FusedGradient, BaselineLeavesHeadsUntouched) {
  auto [model, batch] = grad_check_instance(Variant::BC, 7);
  DualModel grads = model.zeros_like();
  fused_batch_loss(model, batch, {}, &grads);
  EXPECT_EQ(grads.first_head, model.first_head.zeros_like());
  EXPECT_EQ(grads.second_head, model.second_head.zeros_like());
}
