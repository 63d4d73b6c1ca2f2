#pragma once

// Reference implementations that share no code with the production paths,
// plus the self-checks built on them. Used by `ihtp verify` and the tests.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ihtp/mlp.hpp"
#include "ihtp/physics.hpp"

namespace ihtp::oracle {

/// Assembles the full implicit system as a dense matrix and solves it with LU.
Eigen::VectorXd dense_implicit_step(const Eigen::VectorXd& field, double q, const Mesh& mesh,
                                    const PhysicalParams& params);

struct KalmanStep {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Textbook linear Kalman filter. The first measurement corrects the prior directly.
std::vector<KalmanStep> kalman_filter(const Eigen::MatrixXd& a, const Eigen::RowVectorXd& h, const Eigen::MatrixXd& q,
                                      double r, const KalmanStep& prior, const std::vector<double>& z);

/// Fixed-interval RTS smoother over a complete filter pass.
std::vector<KalmanStep> rts_smoother(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q,
                                     const std::vector<KalmanStep>& filtered);

/// Central-difference derivative of every network output with respect to every
/// parameter, in the same layout as jacobian_wrt_weights.
Eigen::MatrixXd finite_difference_weights(const MlpModel& model, const Eigen::VectorXd& input, double step);

/// q L / (rho c_p u_m h): outlet bulk rise once the wall heat is all advected out.
double analytic_bulk_rise(double q, const PhysicalParams& params);

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Production step vs dense solve, `steps` steps from a non-uniform field.
Check forward_solver(int nx = 5, int ny = 8, int steps = 20);
/// Steady outlet bulk rise vs analytic_bulk_rise under constant flux.
Check energy_balance(double q = 2500.0, double tolerance = 0.02);
/// Fixed-lag EKF/RTS on a 2-state linear model vs the dense filter and smoother.
Check linear_kalman(std::size_t lag = 5, std::size_t steps = 60);
/// The smoother with zero lag returns the filter exactly.
Check zero_lag_identity(std::size_t steps = 40);
/// Backprop weight Jacobian vs central differences over random networks.
Check weight_jacobian(int nets = 100, std::uint64_t seed = 1);

std::vector<Check> all_checks();

}  // namespace ihtp::oracle
