#include "sinkcpd/cli.hpp"
#include "sinkcpd/datagen.hpp"
#include "sinkcpd/detector.hpp"
#include "sinkcpd/error.hpp"
#include "sinkcpd/io.hpp"
#include "sinkcpd/metric_learn.hpp"
#include "sinkcpd/presets.hpp"

#include <json.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

using namespace sinkcpd;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sinkcpd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sinkcpd_test_cli_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Small GMM stream: 5 changes, d = 100.
  void generate_small(const std::string& sub, const std::string& seed = "7") {
    const auto r = run_cli({"generate", "--dataset", "gmm", "--seed", seed, "--changes", "5",
                            "--out", path(sub)});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, GenerateGmmShape) {
  const auto r = run_cli(
      {"generate", "--dataset", "gmm", "--seed", "7", "--changes", "25", "--out", path("g")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Matrix data = io::read_sequence_csv(path("g/data.csv"));
  EXPECT_EQ(data.rows(), 2600);
  EXPECT_EQ(data.cols(), 100);
  EXPECT_EQ(io::read_labels(path("g/labels.txt"), data.rows()).size(), 25u);
}

TEST_F(CliTest, GenerateDeterministic) {
  generate_small("a");
  generate_small("b");
  EXPECT_EQ(io::read_file(path("a/data.csv")), io::read_file(path("b/data.csv")));
  EXPECT_EQ(io::read_file(path("a/labels.txt")), io::read_file(path("b/labels.txt")));
}

TEST_F(CliTest, BogusDatasetFailsWithUsage) {
  const auto r = run_cli({"generate", "--dataset", "bogus", "--out", path("x")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE((r.err + r.out).find("--dataset"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("x/data.csv")));
}

TEST_F(CliTest, MissingRequiredAndUnknownCommand) {
  EXPECT_NE(run_cli({"train", "--data", path("none.csv")}).code, 0);
  EXPECT_NE(run_cli({"frobnicate"}).code, 0);
  EXPECT_NE(run_cli({}).code, 0);
}

TEST(Presets, TableRows) {
  struct Row {
    const char* name;
    Index r, w;
    double gamma, lr, l1;
    Index buffer;
  };
  const std::vector<Row> expected = {
      {"gmm", 5, 10, 0.1, 0.01, 0.0, 0},         {"freq", 50, 100, 1.0, 0.01, 0.0, 0},
      {"freq-slope", 50, 100, 1.0, 0.01, 5e-5, 0}, {"beedance", 3, 15, 0.1, 0.01, 0.0, 0},
      {"hasc", 3, 200, 0.1, 0.01, 0.0, 0},       {"yahoo", 5, 2, 0.1, 0.001, 0.0, 0},
      {"ecg", 2, 3, 0.001, 0.001, 0.0, 0},       {"sleep", 42, 15, 1.0, 0.01, 0.01, 10},
  };
  ASSERT_EQ(presets().size(), expected.size());
  for (const auto& row : expected) {
    TrainConfig cfg;
    apply_preset(find_preset(row.name), cfg);
    EXPECT_EQ(cfg.projection_dim, row.r) << row.name;
    EXPECT_EQ(cfg.window, row.w) << row.name;
    EXPECT_EQ(cfg.gamma, row.gamma) << row.name;
    EXPECT_EQ(cfg.learn_rate, row.lr) << row.name;
    EXPECT_EQ(cfg.l1_weight, row.l1) << row.name;
    EXPECT_EQ(cfg.buffer, row.buffer) << row.name;
    EXPECT_EQ(cfg.iterations, 2000) << row.name;
  }
  EXPECT_THROW(find_preset("nope"), InputError);
}

TEST_F(CliTest, TrainPresetAndOverrides) {
  generate_small("g");
  auto r = run_cli({"train", "--data", path("g/data.csv"), "--labels", path("g/labels.txt"),
                    "--preset", "gmm", "--iters", "3", "--out", path("m.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto m = io::read_model(path("m.json"));
  EXPECT_EQ(m.metric.projection_dim(), 5);
  EXPECT_EQ(m.config.window, 10);
  EXPECT_EQ(m.metric.gamma, 0.1);
  EXPECT_EQ(m.config.learn_rate, 0.01);
  EXPECT_EQ(m.train_loss_history.size(), 4u);

  r = run_cli({"train", "--data", path("g/data.csv"), "--labels", path("g/labels.txt"),
               "--preset", "sleep", "--proj-dim", "4", "--window", "12", "--iters", "1", "--out",
               path("s.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  m = io::read_model(path("s.json"));
  EXPECT_EQ(m.metric.projection_dim(), 4);
  EXPECT_EQ(m.config.window, 12);
  EXPECT_EQ(m.config.l1_weight, 0.01);
  EXPECT_EQ(m.config.buffer, 10);
}

TEST_F(CliTest, TrainZeroItersIsInitialization) {
  generate_small("g");
  const auto r = run_cli({"train", "--data", path("g/data.csv"), "--labels", path("g/labels.txt"),
                          "--iters", "0", "--out", path("m.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = io::read_model(path("m.json"));
  EXPECT_EQ(m.metric.L, init_metric(5, 100, InitScheme::Auto, 0));
  EXPECT_EQ(m.best_iteration, 0);
}

TEST_F(CliTest, TrainRejectsBadLabels) {
  generate_small("g");
  io::write_file_atomic(path("bad.txt"), "5000\n");
  const auto r = run_cli({"train", "--data", path("g/data.csv"), "--labels", path("bad.txt"),
                          "--out", path("m.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(path("m.json")));
}

TEST_F(CliTest, DetectIdentityAndThresholdInf) {
  generate_small("g");
  const auto r = run_cli({"detect", "--data", path("g/data.csv"), "--window", "20", "--out",
                          path("s.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto s = io::read_scores_csv(path("s.csv"));
  EXPECT_EQ(s.length(), 600);
  EXPECT_EQ(s.first, 20);
  EXPECT_EQ(io::read_file(path("s_detections.txt")), "");

  const Matrix data = io::read_sequence_csv(path("g/data.csv"));
  const auto direct = change_scores(data, GroundMetric::identity(100, 0.1), 20);
  for (Index n = s.first; n <= s.last; ++n)
    EXPECT_EQ(s.scores[static_cast<std::size_t>(n)], direct.scores[static_cast<std::size_t>(n)]);
}

TEST_F(CliTest, DetectDimensionMismatch) {
  generate_small("g");
  auto r = run_cli({"train", "--data", path("g/data.csv"), "--labels", path("g/labels.txt"),
                    "--iters", "0", "--out", path("m.json")});
  ASSERT_EQ(r.code, 0);
  io::write_sequence_csv(path("small.csv"), Matrix::Zero(50, 3));
  r = run_cli({"detect", "--data", path("small.csv"), "--model", path("m.json"), "--out",
               path("s.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("model expects d=100 features but data has 3 columns"), std::string::npos)
      << r.err;
}

TEST_F(CliTest, EndToEndGmmDetectionsNearTruth) {
  GenSpec spec;
  spec.dataset = Dataset::SwitchingGmm;
  spec.n_changes = 3;
  spec.segment_len = 200;
  spec.seed = 9;
  const auto seq = generate(spec);
  io::write_sequence_csv(path("d.csv"), seq.data);
  const auto direct = change_scores(seq.data, GroundMetric::identity(100, 1.0), 50);
  double calm = 0.0;
  for (Index n = direct.first; n <= direct.last; ++n) {
    bool near = false;
    for (Index c : seq.change_points) near = near || std::abs(n - c) <= 50;
    if (!near) calm = std::max(calm, direct.scores[static_cast<std::size_t>(n)]);
  }
  const auto r = run_cli({"detect", "--data", path("d.csv"), "--window", "50", "--gamma", "1",
                          "--threshold", io::format_double(calm), "--out", path("s.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto found = io::read_labels(path("s_detections.txt"));
  ASSERT_FALSE(found.empty());
  for (Index n : found) {
    Index nearest = 1 << 30;
    for (Index c : seq.change_points) nearest = std::min(nearest, std::abs(n - c));
    EXPECT_LE(nearest, 2);
  }
}

TEST_F(CliTest, EvalJson) {
  ChangeScoreSeries s;
  s.scores = {0, 0, .1, 0, 0, .9, 0, .5, 0, 0};
  s.valid.assign(10, true);
  s.interpolated.assign(10, false);
  s.first = 0;
  s.last = 9;
  io::write_scores_csv(path("s.csv"), s);
  io::write_labels(path("l.txt"), {5});
  const auto r = run_cli({"eval", "--scores", path("s.csv"), "--labels", path("l.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["auc"].get<double>(), 1.0);
  EXPECT_EQ(j["match_margin"].get<int>(), 0);
  EXPECT_EQ(j["n_labels"].get<int>(), 1);
  EXPECT_FALSE(j["roc"].empty());
}

TEST_F(CliTest, ExperimentWindowCurveAndDeterminism) {
  generate_small("g");
  ASSERT_EQ(run_cli({"train", "--data", path("g/data.csv"), "--labels", path("g/labels.txt"),
                     "--iters", "2", "--out", path("m.json")})
                .code,
            0);
  const std::vector<std::string> args = {"experiment", "errors-vs-window", "--windows", "5,10",
                                          "--model", path("m.json"), "--trials", "10",
                                          "--out", path("e1.csv")};
  auto r = run_cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  auto again = args;
  again.back() = path("e2.csv");
  ASSERT_EQ(run_cli(again).code, 0);
  const std::string text = io::read_file(path("e1.csv"));
  EXPECT_EQ(text, io::read_file(path("e2.csv")));
  EXPECT_EQ(text.substr(0, text.find('\n')), "metric,axis,axis_value,tau,type1,type2");
  EXPECT_NE(text.find("learned,window_size,5,"), std::string::npos);
  EXPECT_NE(text.find("identity,window_size,10,"), std::string::npos);
  EXPECT_NE(run_cli({"experiment", "nonsense", "--out", path("z.csv")}).code, 0);
}

TEST_F(CliTest, TrainAndDetectDeterministic) {
  generate_small("g");
  for (const char* out : {"m1.json", "m2.json"}) {
    ASSERT_EQ(run_cli({"train", "--data", path("g/data.csv"), "--labels", path("g/labels.txt"),
                       "--iters", "5", "--out", path(out)})
                  .code,
              0);
  }
  EXPECT_EQ(io::read_file(path("m1.json")), io::read_file(path("m2.json")));
  for (const char* out : {"s1.csv", "s2.csv"}) {
    ASSERT_EQ(run_cli({"detect", "--data", path("g/data.csv"), "--model", path("m1.json"),
                       "--threshold", "0.5", "--out", path(out)})
                  .code,
              0);
  }
  EXPECT_EQ(io::read_file(path("s1.csv")), io::read_file(path("s2.csv")));
  EXPECT_EQ(io::read_file(path("s1_detections.txt")), io::read_file(path("s2_detections.txt")));
}
