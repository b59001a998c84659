#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kSmall =
    " --identities 24 --images_per_identity 5 --epochs 1 --hidden 16 --feature_dim 8 --batch_size 8"
    " --bona_fide_pairs 20 --log_every 0";

int run(const fs::path& cwd, const std::string& args) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" FCMAD_CLI_PATH "' " + args + " >out.txt 2>err.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("fcmad_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  void pipeline(const std::string& data) {
    ASSERT_EQ(run(dir_, "gen-data --data_dir " + data + kSmall), 0) << slurp(dir_ / "err.txt");
    ASSERT_EQ(run(dir_, "gen-morphs --data_dir " + data + kSmall), 0) << slurp(dir_ / "err.txt");
    ASSERT_EQ(run(dir_, "gen-protocol --data_dir " + data + kSmall), 0) << slurp(dir_ / "err.txt");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, FullPipelineIsReproducible) {
  for (const std::string run_id : {"a", "b"}) {
    const std::string d = "data_" + run_id, o = "out_" + run_id;
    pipeline(d);
    ASSERT_EQ(run(dir_, "train --data_dir " + d + " --out_dir " + o + "/v2 --variant fc-v2" + kSmall), 0)
        << slurp(dir_ / "err.txt");
    ASSERT_EQ(run(dir_, "train --data_dir " + d + " --out_dir " + o + "/fr --variant fr" + kSmall), 0)
        << slurp(dir_ / "err.txt");
    ASSERT_EQ(run(dir_, "eval --data_dir " + d + " --out_dir " + o + "/eval --checkpoint " + o +
                            "/v2/model.ckpt --fr_checkpoint " + o + "/fr/model.ckpt --protocol " + d +
                            "/protocol-latent.tsv" + kSmall),
              0)
        << slurp(dir_ / "err.txt");
  }
  for (const char* f : {"eval/scores.tsv", "eval/metrics.csv", "eval/det.csv", "eval/scores_fused.tsv",
                        "v2/train_report.csv", "v2/model.ckpt"}) {
    const auto a = slurp(dir_ / "out_a" / f), b = slurp(dir_ / "out_b" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, b) << f;
  }
  EXPECT_EQ(slurp(dir_ / "data_a/protocol-latent.tsv"), slurp(dir_ / "data_b/protocol-latent.tsv"));
  const auto metrics = slurp(dir_ / "out_a/eval/metrics.csv");
  EXPECT_EQ(metrics.rfind("method,delta,apcer,threshold\n", 0), 0u);
  EXPECT_NE(metrics.find("fc-v2+fr-dissimilarity,0.1,"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "out_a/eval/det.svg"));
  EXPECT_TRUE(fs::exists(dir_ / "out_a/eval/eval.cfg"));

  ASSERT_EQ(run(dir_, "compare --out_dir cmp --protocol data_a/protocol-latent.tsv --run v2=out_a/eval/scores.tsv"
                      " --run fused=out_a/eval/scores_fused.tsv --delta 0.1 --delta 0.05"),
            0)
      << slurp(dir_ / "err.txt");
  const auto wide = slurp(dir_ / "cmp/comparison_wide.csv");
  EXPECT_EQ(wide.rfind("method,protocol,apcer@bpcer=0.1,apcer@bpcer=0.05\n", 0), 0u);
  EXPECT_NE(wide.find("\nfused,protocol-latent,"), std::string::npos);
}

TEST_F(Cli, ConfigFileAndOverrides) {
  {
    std::ofstream cfg(dir_ / "run.cfg");
    cfg << "identities = 12\nimages_per_identity = 3\n";
  }
  ASSERT_EQ(run(dir_, "gen-data --config run.cfg --data_dir d --images_per_identity=4"), 0) << slurp(dir_ / "err.txt");
  const auto saved = slurp(dir_ / "d/gen-data.cfg");
  EXPECT_NE(saved.find("identities = 12\n"), std::string::npos);
  EXPECT_NE(saved.find("images_per_identity = 4\n"), std::string::npos);
  std::size_t lines = 0;
  std::ifstream manifest(dir_ / "d/dataset.tsv");
  for (std::string l; std::getline(manifest, l);) ++lines;
  EXPECT_EQ(lines, 48u);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run(dir_, "gen-data --no_such_key 1"), 1);
  EXPECT_EQ(run(dir_, "gen-data --data_dir"), 1);
  EXPECT_EQ(run(dir_, "frobnicate"), 1);
  EXPECT_EQ(run(dir_, "gen-data --config missing.cfg"), 1);
  EXPECT_EQ(run(dir_, "gen-morphs --data_dir nowhere"), 2);
  EXPECT_EQ(run(dir_, "eval --checkpoint nope.ckpt --protocol nope.tsv"), 2);
  EXPECT_EQ(run(dir_, "eval --protocol nope.tsv"), 1);
  EXPECT_EQ(run(dir_, "--help"), 0);
  EXPECT_NE(slurp(dir_ / "out.txt").find("lr_start"), std::string::npos);
}

TEST_F(Cli, SelftestPassesAndDetectsCorruption) {
  EXPECT_EQ(run(dir_, "selftest"), 0);
  EXPECT_NE(slurp(dir_ / "out.txt").find("selftest passed"), std::string::npos);
  EXPECT_EQ(run(dir_, "selftest --corrupt-gradient"), 3);
  EXPECT_NE(slurp(dir_ / "out.txt").find("FAIL"), std::string::npos);
}

TEST_F(Cli, EvalReportsUnreadableImages) {
  pipeline("d");
  ASSERT_EQ(run(dir_, "train --data_dir d --out_dir m --variant bc" + kSmall), 0) << slurp(dir_ / "err.txt");
  {
    std::ofstream p(dir_ / "broken.tsv");
    std::ifstream src(dir_ / "d/protocol-latent.tsv");
    std::string line;
    std::getline(src, line);
    p << line << '\n' << "gone\tbonafide/missing.pgm\tbonafide/missing.pgm\tbonafide\n";
    while (std::getline(src, line)) p << line << '\n';
  }
  EXPECT_EQ(run(dir_, "eval --data_dir d --out_dir e --checkpoint m/model.ckpt --protocol broken.tsv" + kSmall), 2);
  EXPECT_NE(slurp(dir_ / "e/failures.tsv").find("gone\t"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "e/metrics.csv"));
  EXPECT_NE(slurp(dir_ / "out.txt").find("excluded: 1"), std::string::npos);
}

TEST_F(Cli, FamilySelectionAndRatios) {
  ASSERT_EQ(run(dir_, "gen-data --data_dir d" + kSmall), 0) << slurp(dir_ / "err.txt");
  ASSERT_EQ(run(dir_, "gen-morphs --data_dir d --family landmark" + kSmall), 0) << slurp(dir_ / "err.txt");
  std::map<std::string, std::size_t> kinds;
  std::ifstream in(dir_ / "d/morphs.tsv");
  for (std::string line; std::getline(in, line);) ++kinds[line.substr(line.rfind('\t') + 1)];
  EXPECT_EQ(kinds.size(), 2u);
  // 24 identities, 10% held out per subset: 22 training identities x 5 images.
  const std::size_t bona = 22 * 5;
  EXPECT_EQ(kinds["selfmorph-lm"], bona / 2);
  EXPECT_EQ(kinds["morph-lm"], bona + 2 * 5 * 2);
}

TEST_F(Cli, DivergenceIsNumericError) {
  pipeline("d");
  EXPECT_EQ(run(dir_, "train --data_dir d --out_dir m --variant fc-v1 --lr_start 1e9 --lr_end 1e9" + kSmall), 3);
  EXPECT_NE(slurp(dir_ / "err.txt").find("diverged"), std::string::npos);
}
