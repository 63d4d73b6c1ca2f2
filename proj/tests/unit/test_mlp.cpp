#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "ihtp/error.hpp"
#include "ihtp/mlp.hpp"
#include "ihtp/oracles.hpp"
#include "ihtp/surrogates.hpp"

namespace ihtp {
namespace {

TEST(Mlp, ParameterLayoutRoundTrips) {
  MlpModel m = MlpModel::random({3, 4, 2}, 5);
  EXPECT_EQ(m.parameter_count(), 3 * 4 + 4 + 4 * 2 + 2);
  const Eigen::VectorXd theta = m.parameters();
  EXPECT_DOUBLE_EQ(theta[1], m.layers()[0].weights(0, 1));
  EXPECT_DOUBLE_EQ(theta[12], m.layers()[0].biases[0]);
  Eigen::VectorXd shifted = theta.array() + 1.0;
  m.set_parameters(shifted);
  EXPECT_EQ(m.parameters(), shifted);
  EXPECT_THROW(m.set_parameters(Eigen::VectorXd::Zero(3)), Error);
}

TEST(Mlp, ForwardMatchesHandComputation) {
  MlpModel m = MlpModel::zeros({2, 2, 1});
  m.layers()[0].weights << 1.0, -1.0, 0.5, 2.0;
  m.layers()[0].biases << 0.1, -0.2;
  m.layers()[1].weights << 3.0, -1.0;
  m.layers()[1].biases << 0.25;
  const Eigen::Vector2d x(0.3, -0.4);
  const double h0 = std::tanh(0.3 + 0.4 + 0.1), h1 = std::tanh(0.15 - 0.8 - 0.2);
  EXPECT_NEAR(forward(m, x)[0], 3.0 * h0 - h1 + 0.25, 1e-14);
}

TEST(Mlp, WeightJacobianMatchesCentralDifferences) {
  const auto check = oracle::weight_jacobian(100, 11);
  EXPECT_TRUE(check.passed) << check.value;
}

TEST(Mlp, BatchForwardMatchesSingle) {
  const MlpModel m = MlpModel::random({4, 6, 6, 3}, 2);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(9, 4);
  const Eigen::MatrixXd y = forward_batch(m, x);
  for (int r = 0; r < 9; ++r) EXPECT_LT((y.row(r).transpose() - forward(m, x.row(r).transpose())).norm(), 1e-13);
}

struct Regression {
  Eigen::MatrixXd x, y;
};

Regression smooth_target(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Regression r{Eigen::MatrixXd(n, 2), Eigen::MatrixXd(n, 1)};
  for (int i = 0; i < n; ++i) {
    r.x(i, 0) = u(rng);
    r.x(i, 1) = u(rng);
    r.y(i, 0) = std::sin(1.5 * r.x(i, 0)) + 0.5 * r.x(i, 1) * r.x(i, 1);
  }
  return r;
}

TEST(LevenbergMarquardt, FitsASmoothFunction) {
  const auto train = smooth_target(200, 1), val = smooth_target(60, 2);
  TrainConfig cfg;
  cfg.max_iterations = 200;
  cfg.patience = 200;
  const auto result = train_levenberg_marquardt(MlpModel::random({2, 8, 1}, 3), train.x, train.y, val.x, val.y, cfg);
  EXPECT_LT(result.report.validation_mse, 1e-4);
  EXPECT_GT(regression_r(result.model, val.x, val.y), 0.999);
}

TEST(LevenbergMarquardt, TrainingErrorNeverIncreases) {
  const auto train = smooth_target(150, 4), val = smooth_target(40, 5);
  TrainConfig cfg;
  cfg.max_iterations = 60;
  cfg.patience = 60;
  const auto result = train_levenberg_marquardt(MlpModel::random({2, 6, 1}, 6), train.x, train.y, val.x, val.y, cfg);
  const auto& h = result.report.sse_history;
  ASSERT_FALSE(h.empty());
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], h[i - 1]);
}

TEST(LevenbergMarquardt, PatienceStopsOnStalledValidation) {
  const auto train = smooth_target(100, 7), val = smooth_target(30, 8);
  TrainConfig cfg;
  cfg.max_iterations = 500;
  cfg.patience = 6;
  TrainHooks hooks;
  // Validation improves for three iterations, then stalls.
  hooks.validation_override = [](int iteration, double) { return iteration <= 3 ? 1.0 / iteration : 10.0; };
  const auto result =
      train_levenberg_marquardt(MlpModel::random({2, 5, 1}, 9), train.x, train.y, val.x, val.y, cfg, hooks);
  EXPECT_EQ(result.report.stop_reason, StopReason::ValidationPatience);
  EXPECT_EQ(result.report.best_iteration, 3);
  EXPECT_EQ(result.report.iterations, 3 + 6);
}

TEST(LevenbergMarquardt, GoalStopsEarly) {
  const auto train = smooth_target(100, 10), val = smooth_target(30, 11);
  TrainConfig cfg;
  cfg.goal_mse = 1e-2;
  const auto result = train_levenberg_marquardt(MlpModel::random({2, 6, 1}, 12), train.x, train.y, val.x, val.y, cfg);
  EXPECT_EQ(result.report.stop_reason, StopReason::Goal);
  EXPECT_LT(result.report.iterations, cfg.max_iterations);
}

TEST(Mlp, JsonRoundTripIsExact) {
  MlpModel m = MlpModel::random({6, 10, 5}, 4);
  Eigen::MatrixXd rows = Eigen::MatrixXd::Random(20, 6);
  Eigen::MatrixXd out = Eigen::MatrixXd::Random(20, 5);
  m.standardizer = Standardizer{ChannelScaler::fit(rows, {"a", "b", "c", "d", "e", "f"}),
                                ChannelScaler::fit(out, {"o1", "o2", "o3", "o4", "o5"})};
  m.manifest_hash = "abc";
  m.metadata["role"] = "transfer";
  const auto path = std::filesystem::temp_directory_path() / "ihtp_mlp_roundtrip.json";
  m.save(path);
  const MlpModel back = MlpModel::load(path);
  EXPECT_EQ(back.parameters(), m.parameters());
  EXPECT_EQ(back.manifest_hash, "abc");
  const Eigen::VectorXd x = rows.row(3).transpose();
  EXPECT_EQ(back.predict(x), m.predict(x));
  std::filesystem::remove(path);
}

TEST(Mlp, PredictUsesStandardizer) {
  MlpModel m = MlpModel::random({1, 3, 1}, 1);
  Eigen::MatrixXd in(3, 1), out(3, 1);
  in << 10, 20, 30;
  out << 100, 300, 500;
  m.standardizer = Standardizer{ChannelScaler::fit(in, {"x"}), ChannelScaler::fit(out, {"y"})};
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 20.0);
  const double z = forward(m, Eigen::VectorXd::Zero(1))[0];
  EXPECT_NEAR(m.predict(x)[0], 300.0 + z * m.standardizer->output.stddev()[0], 1e-9);
}

TEST(Fit, SplitsStandardizesAndScores) {
  Dataset d;
  const auto r = smooth_target(300, 13);
  d.inputs = r.x.array() * 50.0 + 300.0;
  d.outputs = r.y.array() * 10.0 + 5.0;
  d.input_names = {"a", "b"};
  d.output_names = {"y"};
  d.tags.assign(300, SampleTag::Transfer);
  FitOptions opt;
  opt.hidden = {8};
  opt.train.max_iterations = 150;
  const auto result = fit_network(d, opt);
  ASSERT_TRUE(result.model.standardizer.has_value());
  EXPECT_LT(result.report.test_mse, 1e-3);
  EXPECT_GT(result.report.regression_r, 0.999);
  EXPECT_NEAR(result.model.predict(d.inputs.row(0).transpose())[0], d.outputs(0, 0), 0.05);
}

}  // namespace
}  // namespace ihtp
