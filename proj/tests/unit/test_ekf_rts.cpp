#include <gtest/gtest.h>

#include <random>

#include <Eigen/Dense>

#include "ihtp/ekf_rts.hpp"
#include "ihtp/oracles.hpp"

namespace ihtp {
namespace {

TEST(Ekf, FixedLagMatchesDenseKalmanSmoother) {
  for (std::size_t lag : {1u, 3u, 5u, 12u}) {
    const auto check = oracle::linear_kalman(lag, 50);
    EXPECT_TRUE(check.passed) << "lag " << lag << ": " << check.value;
  }
}

TEST(Ekf, ZeroLagEqualsFilterExactly) {
  const auto check = oracle::zero_lag_identity(40);
  EXPECT_TRUE(check.passed);
  EXPECT_EQ(check.value, 0.0);
}

TEST(Ekf, ScalarUpdateMatchesTextbook) {
  GaussianState prior{Eigen::Vector2d(1.0, 2.0), Eigen::Matrix2d{{2.0, 0.5}, {0.5, 1.0}}};
  const Eigen::RowVector2d h(1.0, 0.0);
  NoiseModel noise = NoiseModel::diagonal(2, 0.1, 0.1, 0.5);
  const GaussianState post = correct(prior, 3.0, h, noise);
  const double s = 2.0 + 0.5;
  const Eigen::Vector2d k(2.0 / s, 0.5 / s);
  EXPECT_LT((post.mean - (prior.mean + k * (3.0 - 1.0))).norm(), 1e-14);
  EXPECT_LT((post.cov - (prior.cov - k * s * k.transpose())).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Ekf, SmootherGainMatchesDirectInverse) {
  const Eigen::Matrix2d p{{2.0, 0.3}, {0.3, 1.0}};
  const Eigen::Matrix2d f{{0.9, 0.2}, {0.0, 1.0}};
  const Eigen::Matrix2d pp = f * p * f.transpose() + Eigen::Matrix2d::Identity() * 0.1;
  const Eigen::MatrixXd g = smoother_gain(p, f, pp);
  EXPECT_LT((g - p * f.transpose() * pp.inverse()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ekf, FilteredDifferenceFormDiffersFromStandard) {
  const Eigen::Matrix2d a{{0.9, 0.1}, {0.0, 1.0}};
  const LinearTransferModel model(a, Eigen::RowVector2d(1.0, 0.0));
  auto run = [&](RtsForm form) {
    SmootherOptions opts;
    opts.lag = 4;
    opts.form = form;
    FixedLagSmoother<LinearTransferModel> s(model, NoiseModel::diagonal(2, 0.01, 0.1, 0.2),
                                            GaussianState{Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity()}, opts);
    std::vector<double> q;
    for (int k = 0; k < 20; ++k)
      if (auto e = s.push(std::sin(0.3 * k))) q.push_back(e->flux());
    return q;
  };
  const auto standard = run(RtsForm::Standard);
  const auto literal = run(RtsForm::FilteredDifference);
  ASSERT_EQ(standard.size(), literal.size());
  double diff = 0.0;
  for (std::size_t i = 0; i < standard.size(); ++i) diff = std::max(diff, std::abs(standard[i] - literal[i]));
  EXPECT_GT(diff, 1e-6);
}

TEST(Ekf, EmissionIndexAndWarmup) {
  const LinearTransferModel model(Eigen::Matrix2d::Identity(), Eigen::RowVector2d(1.0, 0.0));
  SmootherOptions opts;
  opts.lag = 3;
  FixedLagSmoother<LinearTransferModel> s(model, NoiseModel::diagonal(2, 0.1, 0.1, 1.0),
                                          GaussianState{Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity()}, opts);
  EXPECT_EQ(s.warmup_shortfall(), 4u);
  for (int k = 0; k < 3; ++k) EXPECT_FALSE(s.push(1.0).has_value());
  EXPECT_EQ(s.warmup_shortfall(), 1u);
  const auto e = s.push(1.0);
  ASSERT_TRUE(e.has_value());
  EXPECT_EQ(e->step, 0u);
  EXPECT_EQ(s.push(1.0)->step, 1u);
}

TEST(Covariance, ChecksSymmetryAndDefiniteness) {
  Eigen::Matrix2d good{{2.0, 0.5}, {0.5, 1.0}};
  EXPECT_TRUE(covariance_ok(good));
  Eigen::Matrix2d asym = good;
  asym(0, 1) += 1e-6;
  double a = 0.0;
  EXPECT_FALSE(covariance_ok(asym, &a));
  EXPECT_GT(a, 1e-9);
  Eigen::Matrix2d indefinite{{1.0, 2.0}, {2.0, 1.0}};
  EXPECT_FALSE(covariance_ok(indefinite));
  // Badly scaled but positive definite matrices pass.
  Eigen::Matrix2d scaled{{1e-4, 0.0}, {0.0, 1e6}};
  EXPECT_TRUE(covariance_ok(scaled));
}

TEST(Covariance, ProjectionClipsNegativeEigenvalues) {
  Eigen::MatrixXd m{{1.0, 2.0}, {2.0, 1.0}};
  project_psd(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
  EXPECT_TRUE(covariance_ok(m));
}

// Property: across random linear systems and noise levels every filter and
// smoother covariance stays symmetric and positive semidefinite.
TEST(Covariance, StaysPsdAcrossRandomSystems) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::lognormal_distribution<double> scale(0.0, 2.0);
  for (int trial = 0; trial < 40; ++trial) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c) a(r, c) = (r == c ? 0.9 : 0.0) + 0.2 * u(rng);
    const LinearTransferModel model(a, Eigen::RowVector3d(1.0, 0.0, 0.0));
    SmootherOptions opts;
    opts.lag = static_cast<std::size_t>(trial % 7);
    FixedLagSmoother<LinearTransferModel> s(
        model, NoiseModel::diagonal(3, 1e-6 * scale(rng), 10.0 * scale(rng), 1e-4 * scale(rng)),
        GaussianState{Eigen::Vector3d::Zero(), Eigen::Vector3d(1.0, 1.0, 1e6).asDiagonal()}, opts);
    for (int k = 0; k < 60; ++k) {
      if (auto e = s.push(std::sin(0.1 * k) + 0.1 * u(rng))) {
        if (opts.lag > 0) EXPECT_TRUE(covariance_ok(e->cov)) << trial;
      }
      EXPECT_TRUE(covariance_ok(s.filtered().cov)) << trial;
    }
    EXPECT_EQ(s.diagnostics().failures, 0u) << trial;
  }
}

struct TwoState {
  Eigen::Matrix2d a{{0.95, 0.1}, {0.0, 1.0}};
  LinearTransferModel model{a, Eigen::RowVector2d(1.0, 0.0)};
  NoiseModel noise = NoiseModel::diagonal(2, 0.01, 0.05, 0.25);
  GaussianState prior{Eigen::Vector2d::Zero(), Eigen::Vector2d(1.0, 4.0).asDiagonal()};

  std::vector<double> data(int n) const {
    std::vector<double> z;
    for (int k = 0; k < n; ++k) z.push_back(std::sin(0.2 * k) + 0.3 * std::cos(1.7 * k));
    return z;
  }
};

TEST(Ekf, SmoothedTraceNeverExceedsFiltered) {
  const TwoState sys;
  const auto z = sys.data(50);
  const auto filtered = oracle::kalman_filter(sys.a, Eigen::RowVector2d(1.0, 0.0), sys.noise.process,
                                              sys.noise.measurement_variance, {sys.prior.mean, sys.prior.cov}, z);
  SmootherOptions opts;
  opts.lag = 6;
  FixedLagSmoother<LinearTransferModel> s(sys.model, sys.noise, sys.prior, opts);
  for (double v : z)
    if (auto e = s.push(v)) EXPECT_LE(e->cov.trace(), filtered[e->step].cov.trace() + 1e-12) << e->step;
}

TEST(Ekf, EstimateIsCausalWithLag) {
  const TwoState sys;
  const auto z = sys.data(40);
  SmootherOptions opts;
  opts.lag = 5;
  auto estimates = [&](std::size_t n) {
    FixedLagSmoother<LinearTransferModel> s(sys.model, sys.noise, sys.prior, opts);
    std::vector<double> q;
    for (std::size_t k = 0; k < n; ++k)
      if (auto e = s.push(z[k])) q.push_back(e->flux());
    return q;
  };
  const auto full = estimates(z.size());
  const auto truncated = estimates(25);
  ASSERT_EQ(truncated.size(), 25u - 5u);
  // The estimate of step k uses measurements up to k + lag only.
  for (std::size_t k = 0; k < truncated.size(); ++k) EXPECT_EQ(truncated[k], full[k]);
}

TEST(Noise, ValidatesShapes) {
  NoiseModel n = NoiseModel::diagonal(3, 1.0, 2.0, 0.5);
  EXPECT_DOUBLE_EQ(n.process(2, 2), 2.0);
  EXPECT_DOUBLE_EQ(n.process(0, 0), 1.0);
  EXPECT_NO_THROW(n.validate(3));
  EXPECT_THROW(n.validate(4), Error);
  n.measurement_variance = 0.0;
  EXPECT_THROW(n.validate(3), Error);
}

TEST(LagWindowTest, KeepsLagPlusOneRecords) {
  LagWindow w(2);
  for (int k = 0; k < 5; ++k) {
    StepRecord r;
    r.filtered_mean = Eigen::VectorXd::Constant(1, k);
    w.push(r);
  }
  EXPECT_EQ(w.size(), 3u);
  EXPECT_TRUE(w.warm());
  EXPECT_DOUBLE_EQ(w[0].filtered_mean[0], 2.0);
  EXPECT_DOUBLE_EQ(w.back().filtered_mean[0], 4.0);
}

}  // namespace
}  // namespace ihtp
