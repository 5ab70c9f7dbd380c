#include "sinkcpd/error.hpp"
#include "sinkcpd/io.hpp"
#include "sinkcpd/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

using namespace sinkcpd;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sinkcpd_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TrainedModel sample_model() {
  CounterRng rng(1);
  TrainedModel m;
  m.metric.L.resize(2, 3);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 3; ++j) m.metric.L(i, j) = rng.normal() / 3.0;
  m.metric.gamma = 0.1;
  m.standardizer.mean = Vector::LinSpaced(3, -1.0, 1.0 / 7.0);
  m.standardizer.scale = Vector::Constant(3, 0.3);
  m.train_loss_history = {1.0, 0.5, 1.0 / 3.0};
  m.val_loss_history = {0.9, 0.8, 0.85};
  m.best_iteration = 1;
  m.config.projection_dim = 2;
  m.config.window = 7;
  m.config.l1_weight = 5e-5;
  m.config.grad_mode = GradMode::FullDebiased;
  m.config.init = InitScheme::ScaledGaussian;
  m.config.loss_reduction = LossReduction::Sum;
  m.train_change_points = {100, 200};
  m.val_change_points = {300};
  return m;
}

}  // namespace

TEST(FormatDouble, ShortestRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 0.0}) {
    EXPECT_EQ(std::stod(io::format_double(x)), x);
  }
  EXPECT_EQ(io::format_double(0.1), "0.1");
  EXPECT_EQ(io::format_double(std::numeric_limits<double>::infinity()), "inf");
}

TEST(SequenceCsv, RoundTripExact) {
  CounterRng rng(2);
  Matrix m(5, 3);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 3; ++j) m(i, j) = rng.normal() * 1e3;
  EXPECT_EQ(io::parse_sequence_csv(io::format_sequence_csv(m)), m);
  const fs::path dir = scratch_dir("seq");
  io::write_sequence_csv(dir / "a" / "x.csv", m);
  EXPECT_EQ(io::read_sequence_csv(dir / "a" / "x.csv"), m);
}

TEST(SequenceCsv, CommentsAndErrors) {
  EXPECT_EQ(io::parse_sequence_csv("# header\n1,2\n3,4\n"), (Matrix(2, 2) << 1, 2, 3, 4).finished());
  EXPECT_THROW(io::parse_sequence_csv("1,2\n3\n"), InputError);
  EXPECT_THROW(io::parse_sequence_csv("1,x\n"), InputError);
  EXPECT_THROW(io::parse_sequence_csv(""), InputError);
  EXPECT_THROW(io::parse_sequence_csv("1,nan\n"), InputError);
  try {
    io::parse_sequence_csv("1,2\n3,oops\n", "f.csv");
    FAIL();
  } catch (const InputError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("f.csv"), std::string::npos);
    EXPECT_NE(msg.find('2'), std::string::npos);
  }
  EXPECT_THROW(io::read_sequence_csv("/nonexistent/file.csv"), InputError);
}

TEST(Labels, RoundTripAndValidation) {
  const std::vector<Index> labels{3, 10, 42};
  EXPECT_EQ(io::parse_labels(io::format_labels(labels)), labels);
  EXPECT_EQ(io::parse_labels("5\n\n9\n"), (std::vector<Index>{5, 9}));
  EXPECT_THROW(io::parse_labels("9\n5\n"), InputError);
  EXPECT_THROW(io::parse_labels("5\n5\n"), InputError);
  EXPECT_THROW(io::parse_labels("-1\n"), InputError);
  EXPECT_THROW(io::parse_labels("4.5\n"), InputError);
  EXPECT_THROW(io::parse_labels("50\n", 50), InputError);
  EXPECT_NO_THROW(io::parse_labels("49\n", 50));
}

TEST(ScoresCsv, RoundTrip) {
  ChangeScoreSeries s;
  s.scores = {0.0, 0.25, 1.0 / 3.0, 0.0};
  s.valid = {false, true, true, false};
  s.interpolated = {false, false, false, false};
  s.first = 1;
  s.last = 2;
  const std::string text = io::format_scores_csv(s);
  EXPECT_EQ(text.substr(0, text.find('\n')), "index,score,valid");
  const auto back = io::parse_scores_csv(text);
  EXPECT_EQ(back.scores, s.scores);
  EXPECT_EQ(back.valid, s.valid);
  EXPECT_EQ(back.first, 1);
  EXPECT_EQ(back.last, 2);
  EXPECT_THROW(io::parse_scores_csv("index,score,valid\n0,1\n"), InputError);
}

TEST(ModelJson, RoundTripExact) {
  const TrainedModel m = sample_model();
  const TrainedModel back = io::model_from_json(io::model_to_json(m));
  EXPECT_EQ(back.metric.L, m.metric.L);
  EXPECT_EQ(back.metric.gamma, m.metric.gamma);
  EXPECT_EQ(back.standardizer.mean, m.standardizer.mean);
  EXPECT_EQ(back.standardizer.scale, m.standardizer.scale);
  EXPECT_EQ(back.train_loss_history, m.train_loss_history);
  EXPECT_EQ(back.val_loss_history, m.val_loss_history);
  EXPECT_EQ(back.best_iteration, 1);
  EXPECT_EQ(back.config.window, 7);
  EXPECT_EQ(back.config.l1_weight, 5e-5);
  EXPECT_EQ(back.config.grad_mode, GradMode::FullDebiased);
  EXPECT_EQ(back.config.init, InitScheme::ScaledGaussian);
  EXPECT_EQ(back.config.loss_reduction, LossReduction::Sum);
  EXPECT_EQ(back.train_change_points, m.train_change_points);
  EXPECT_EQ(back.val_change_points, m.val_change_points);
  EXPECT_EQ(io::model_to_json(back), io::model_to_json(m));
}

TEST(ModelJson, RejectsMalformed) {
  EXPECT_THROW(io::model_from_json("{not json"), InputError);
  EXPECT_THROW(io::model_from_json("{}"), InputError);
  std::string text = io::model_to_json(sample_model());
  const auto pos = text.find("\"r\"");
  ASSERT_NE(pos, std::string::npos);
  std::string wrong = text;
  wrong.replace(wrong.find(':', pos) + 1, 2, " 7");
  EXPECT_THROW(io::model_from_json(wrong), InputError);
}

TEST(AtomicWrite, ReplacesWithoutLeftovers) {
  const fs::path dir = scratch_dir("atomic");
  const fs::path target = dir / "nested" / "out.txt";
  io::write_file_atomic(target, "first");
  io::write_file_atomic(target, "second");
  EXPECT_EQ(io::read_file(target), "second");
  std::size_t entries = 0;
  for (const auto& e : fs::directory_iterator(target.parent_path())) {
    (void)e;
    ++entries;
  }
  EXPECT_EQ(entries, 1u);
  EXPECT_THROW(io::read_file(dir / "missing"), InputError);
}
