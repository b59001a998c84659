#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "fcmad/checkpoint.hpp"
#include "fcmad/datamine.hpp"
#include "fcmad/dataset.hpp"
#include "fcmad/evalbench.hpp"
#include "fcmad/trainer.hpp"

using namespace fcmad;

namespace {

struct Toy {
  FaceSynth synth{3, {}};
  SplitPlan split;
  Corpus corpus;
  ModelConfig model;
  SgdConfig sgd;

  Toy() {
    std::vector<std::size_t> ids(10);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    split = split_identities(ids, 1);
    const auto bona = generate_bona_fides(synth, ids, 6);
    const auto gen = generate_family(synth, bona, split, MorphFamily::Landmark, 15, 40, {}, 2);
    std::vector<LabeledSample> self, morphs;
    for (const auto& s : gen) (is_morph(s.kind) ? morphs : self).push_back(s);
    corpus = assemble_dataset(bona, self, morphs, 3);
    model.hidden = {16};
    model.feature_dim = 8;
    model.num_identities = ids.size();
    sgd.batch_size = 8;
    sgd.epochs = 2;
  }
};

}  // namespace

TEST(PrepareInput, StandardizesPerImage) {
  const Vector px{0.1, 0.4, 0.9, 0.2, 0.6};
  const auto x = prepare_input(px, 0.25);
  double mean = 0, var = 0;
  for (double v : x) mean += v / 5;
  for (double v : x) var += (v - mean) * (v - mean) / 5;
  EXPECT_NEAR(mean, 0.0, 1e-15);
  EXPECT_NEAR(std::sqrt(var), 0.25, 1e-12);
  EXPECT_EQ(prepare_input(px, 0.0), px);
  EXPECT_EQ(prepare_input(Vector(4, 0.7), 0.25), Vector(4, 0.0));
}

TEST(DualModel, CreateShapesAndValidation) {
  ModelConfig cfg;
  cfg.input_dim = 6;
  cfg.hidden = {5};
  cfg.feature_dim = 3;
  cfg.num_identities = 4;
  const auto v2 = DualModel::create(cfg, Variant::FC_V2, 1);
  EXPECT_EQ(v2.first_head.num_classes(), 8u);
  EXPECT_EQ(v2.second_head.num_classes(), 8u);
  const auto v1 = DualModel::create(cfg, Variant::FC_V1, 1);
  EXPECT_EQ(v1.first_head.num_classes(), 4u);
  EXPECT_NE(v1.first_backbone, v1.second_backbone);
  cfg.input_std = -1;
  EXPECT_THROW(DualModel::create(cfg, Variant::BC, 1), ConfigError);
}

TEST(Train, StepCountFollowsSchedule) {
  Toy t;
  const auto r = train(t.corpus, t.model, t.sgd, Variant::FC_V1, 5);
  EXPECT_EQ(r.report.steps.size(), t.sgd.epochs * (t.corpus.size() / t.sgd.batch_size));
  EXPECT_DOUBLE_EQ(r.report.steps.front().lr, t.sgd.lr_start);
  EXPECT_DOUBLE_EQ(r.report.steps.back().lr, t.sgd.lr_end);
  for (const auto& s : r.report.steps) {
    EXPECT_TRUE(std::isfinite(s.total));
    EXPECT_GE(s.t_ratio, 0.0);
    EXPECT_LE(s.t_ratio, 1.0);
  }
}

TEST(Train, IsDeterministic) {
  Toy t;
  const auto a = train(t.corpus, t.model, t.sgd, Variant::FC_V2, 9);
  const auto b = train(t.corpus, t.model, t.sgd, Variant::FC_V2, 9);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.report.to_csv(), b.report.to_csv());
}

TEST(Train, ZeroLearningRateLeavesInitialization) {
  Toy t;
  t.sgd.lr_start = t.sgd.lr_end = 0.0;
  const auto r = train(t.corpus, t.model, t.sgd, Variant::FC_V1, 4);
  EXPECT_EQ(r.model, DualModel::create(t.model, Variant::FC_V1, derive_seed(4, "init")));
}

TEST(Train, LossDecreases) {
  Toy t;
  t.sgd.epochs = 6;
  const auto r = train(t.corpus, t.model, t.sgd, Variant::FC_V1, 1);
  const auto& s = r.report.steps;
  double early = 0, late = 0;
  const std::size_t k = 5;
  for (std::size_t i = 0; i < k; ++i) {
    early += s[i].total;
    late += s[s.size() - 1 - i].total;
  }
  EXPECT_LT(late, early);
}

TEST(Train, BaselineKeepsHeadsAtInitialization) {
  Toy t;
  const auto r = train(t.corpus, t.model, t.sgd, Variant::BC, 2);
  const auto init = DualModel::create(t.model, Variant::BC, derive_seed(2, "init"));
  EXPECT_EQ(r.model.first_head, init.first_head);
  EXPECT_EQ(r.model.second_head, init.second_head);
  EXPECT_NE(r.model.first_backbone, init.first_backbone);
  for (const auto& s : r.report.steps) {
    EXPECT_EQ(s.l1, 0.0);
    EXPECT_EQ(s.l2, 0.0);
  }
}

TEST(Train, ScoreIsSigmoidOfFeatureDot) {
  Toy t;
  const auto m = train(t.corpus, t.model, t.sgd, Variant::FC_V1, 2).model;
  const auto& a = t.corpus.front().face.image;
  const auto& b = t.corpus.back().face.image;
  const auto f1 = extract_features(m, a, Network::First);
  const auto f2 = extract_features(m, b, Network::Second);
  double d = 0;
  for (std::size_t i = 0; i < f1.size(); ++i) d += f1[i] * f2[i];
  EXPECT_NEAR(score_pair(m, a, b), 1.0 / (1.0 + std::exp(-d)), 1e-12);
}

TEST(Checkpoint, DualRoundTripIsExact) {
  Toy t;
  for (Variant v : {Variant::BC, Variant::FC_V1, Variant::FC_V2}) {
    const auto m = train(t.corpus, t.model, t.sgd, v, 3).model;
    std::stringstream ss;
    save_checkpoint(ss, m);
    const auto back = std::get<DualModel>(load_checkpoint(ss));
    EXPECT_EQ(back, m) << to_string(v);
  }
}

TEST(Checkpoint, FrRoundTripIsExact) {
  Toy t;
  const auto fr = train_fr_model(t.corpus, t.model, t.sgd, 5);
  std::stringstream ss;
  save_checkpoint(ss, fr);
  EXPECT_EQ(std::get<FrModel>(load_checkpoint(ss)), fr);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  Toy t;
  const auto m = DualModel::create(t.model, Variant::FC_V1, 1);
  std::stringstream ss;
  save_checkpoint(ss, m);
  std::string text = ss.str();
  std::istringstream truncated(text.substr(0, text.size() / 2));
  EXPECT_THROW(load_checkpoint(truncated), IoError);
  std::istringstream wrong("fcmad-checkpoint 99\n");
  EXPECT_THROW(load_checkpoint(wrong), IoError);
  std::istringstream empty("");
  EXPECT_THROW(load_checkpoint(empty), IoError);
  EXPECT_THROW(load_checkpoint(std::filesystem::path("/nonexistent/model.ckpt")), IoError);
}

TEST(FrModel, SimilarityInUnitRangeAndSymmetric) {
  Toy t;
  const auto fr = train_fr_model(t.corpus, t.model, t.sgd, 5);
  const auto& a = t.corpus[0].face.image;
  const auto& b = t.corpus[7].face.image;
  const double s = fr_similarity(fr, a, b);
  EXPECT_GE(s, 0.0);
  EXPECT_LE(s, 1.0);
  EXPECT_DOUBLE_EQ(s, fr_similarity(fr, b, a));
  EXPECT_NEAR(fr_similarity(fr, a, a), 1.0, 1e-12);
}

TEST(Separation, MatchesHandComputedRatio) {
  // Identity network on 2-pixel images: features equal standardized pixels.
  DualModel m;
  m.input_std = 0.0;
  DenseLayer id{Tensor2(2, 2, Vector{1, 0, 0, 1}), Vector(2, 0.0), Activation::Linear};
  m.first_backbone = MlpBackbone({id});
  m.second_backbone = MlpBackbone({id});
  auto img = [](double x, double y) {
    GrayImage g(2, 1);
    g.at(0, 0) = x;
    g.at(1, 0) = y;
    return g;
  };
  std::vector<LabeledSample> eval{
      {"a", {img(0, 0), {}, 0, 0}, {0, 0}, SampleKind::BonaFide},
      {"b", {img(1, 0), {}, 1, 1}, {1, 1}, SampleKind::BonaFide},
      {"m", {img(0.5, 0), {}, 0, 1}, {0, 1}, SampleKind::MorphLandmark},
  };
  const auto s = morph_separation_stat(m, eval);
  ASSERT_TRUE(s.first && s.second);
  EXPECT_NEAR(*s.first, 0.5, 1e-12);
  EXPECT_NEAR(*s.second, 0.5, 1e-12);
  EXPECT_NEAR(*s.mean(), 0.5, 1e-12);
}
