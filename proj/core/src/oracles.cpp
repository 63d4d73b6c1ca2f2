#include "ihtp/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "ihtp/ekf_rts.hpp"
#include "ihtp/error.hpp"
#include "ihtp/transfer_models.hpp"

namespace ihtp::oracle {

Eigen::VectorXd dense_implicit_step(const Eigen::VectorXd& field, double q, const Mesh& mesh,
                                    const PhysicalParams& params) {
  const int n = mesh.cells();
  const double cap = params.density * params.specific_heat;
  const double k = params.conductivity;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  // Cell balance per unit depth, integrated over dx*dy.
  for (int i = 0; i < mesh.nx; ++i) {
    for (int j = 0; j < mesh.ny; ++j) {
      const int p = i * mesh.ny + j;
      const double y = (j + 0.5) * mesh.dy;
      const double u = 6.0 * params.mean_velocity * (y / params.height) * (1.0 - y / params.height);
      const double vol = mesh.dx * mesh.dy;
      a(p, p) += cap * vol / mesh.dt;
      b[p] += cap * vol / mesh.dt * field[p];
      // Upwind inflow through the west face, outflow through the east face.
      a(p, p) += cap * u * mesh.dy;
      if (i == 0)
        b[p] += cap * u * mesh.dy * params.inlet_temperature;
      else
        a(p, p - mesh.ny) -= cap * u * mesh.dy;
      const double g = k * mesh.dx / mesh.dy;
      if (j > 0) {
        a(p, p) += g;
        a(p, p - 1) -= g;
      }
      if (j < mesh.ny - 1) {
        a(p, p) += g;
        a(p, p + 1) -= g;
      } else {
        b[p] += q * mesh.dx;
      }
    }
  }
  return a.partialPivLu().solve(b);
}

std::vector<KalmanStep> kalman_filter(const Eigen::MatrixXd& a, const Eigen::RowVectorXd& h, const Eigen::MatrixXd& q,
                                      double r, const KalmanStep& prior, const std::vector<double>& z) {
  std::vector<KalmanStep> out;
  Eigen::VectorXd x = prior.mean;
  Eigen::MatrixXd p = prior.cov;
  const Eigen::Index n = a.rows();
  for (std::size_t t = 0; t < z.size(); ++t) {
    if (t > 0) {
      x = a * x;
      p = a * p * a.transpose() + q;
    }
    const double s = (h * p * h.transpose())(0, 0) + r;
    const Eigen::VectorXd gain = p * h.transpose() / s;
    x = x + gain * (z[t] - (h * x)(0, 0));
    // Joseph form, a different algebraic route from the production update.
    const Eigen::MatrixXd i_kh = Eigen::MatrixXd::Identity(n, n) - gain * h;
    p = i_kh * p * i_kh.transpose() + gain * r * gain.transpose();
    out.push_back({x, p});
  }
  return out;
}

std::vector<KalmanStep> rts_smoother(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q,
                                     const std::vector<KalmanStep>& filtered) {
  std::vector<KalmanStep> out(filtered);
  for (std::size_t t = filtered.size() - 1; t-- > 0;) {
    const Eigen::MatrixXd pp = a * filtered[t].cov * a.transpose() + q;
    const Eigen::MatrixXd g = filtered[t].cov * a.transpose() * pp.inverse();
    out[t].mean = filtered[t].mean + g * (out[t + 1].mean - a * filtered[t].mean);
    out[t].cov = filtered[t].cov + g * (out[t + 1].cov - pp) * g.transpose();
  }
  return out;
}

Eigen::MatrixXd finite_difference_weights(const MlpModel& model, const Eigen::VectorXd& input, double step) {
  MlpModel probe = model;
  const Eigen::VectorXd theta = model.parameters();
  Eigen::MatrixXd j(model.outputs(), theta.size());
  for (Eigen::Index c = 0; c < theta.size(); ++c) {
    Eigen::VectorXd t = theta;
    t[c] = theta[c] + step;
    probe.set_parameters(t);
    const Eigen::VectorXd plus = forward(probe, input);
    t[c] = theta[c] - step;
    probe.set_parameters(t);
    const Eigen::VectorXd minus = forward(probe, input);
    j.col(c) = (plus - minus) / (2.0 * step);
  }
  return j;
}

double analytic_bulk_rise(double q, const PhysicalParams& params) {
  return q * params.length /
         (params.density * params.specific_heat * params.mean_velocity * params.height);
}

namespace {

Check finish(std::string name, double value, double tolerance, std::string detail = {}) {
  return {std::move(name), std::isfinite(value) && value <= tolerance, value, tolerance, std::move(detail)};
}

}  // namespace

Check forward_solver(int nx, int ny, int steps) {
  PhysicalParams params;
  const Mesh mesh = Mesh::uniform(nx, ny, params, 0.01);
  Eigen::VectorXd prod(mesh.cells()), dense(mesh.cells());
  for (int p = 0; p < mesh.cells(); ++p) prod[p] = params.inlet_temperature + 3.0 * std::sin(0.7 * p);
  dense = prod;
  double worst = 0.0;
  for (int s = 0; s < steps; ++s) {
    const double q = 2000.0 + 500.0 * std::cos(0.3 * s);
    Eigen::VectorXd next(mesh.cells());
    advance_step_into(prod, q, mesh, params, next);
    prod = next;
    dense = dense_implicit_step(dense, q, mesh, params);
    worst = std::max(worst, ((prod - dense).array().abs() / dense.array().abs()).maxCoeff());
  }
  return finish("forward solver matches dense solve", worst, 1e-10,
                std::to_string(nx) + "x" + std::to_string(ny) + " mesh, " + std::to_string(steps) + " steps");
}

Check energy_balance(double q, double tolerance) {
  PhysicalParams params;
  const Mesh mesh;
  Eigen::VectorXd cur = Eigen::VectorXd::Constant(mesh.cells(), params.inlet_temperature);
  Eigen::VectorXd next(mesh.cells());
  // Implicit Euler is unconditionally stable, so a long step reaches steady state quickly.
  Mesh coarse_time = mesh;
  coarse_time.dt = 10.0;
  double change = INFINITY;
  int iterations = 0;
  while (change > 1e-10 && iterations < 100000) {
    advance_step_into(cur, q, coarse_time, params, next);
    change = (next - cur).cwiseAbs().maxCoeff();
    cur.swap(next);
    ++iterations;
  }
  const double rise = outlet_bulk_rise(TemperatureField{cur}, mesh, params);
  const double expected = analytic_bulk_rise(q, params);
  return finish("steady energy balance", std::abs(rise - expected) / expected, tolerance,
                "bulk rise " + std::to_string(rise) + " K vs " + std::to_string(expected) + " K");
}

namespace {

struct LinearCase {
  Eigen::MatrixXd a{{0.95, 0.1}, {0.0, 1.0}};
  Eigen::RowVectorXd h{{1.0, 0.0}};
  double temperature_variance = 0.01;
  double flux_variance = 0.05;
  double r = 0.25;
  KalmanStep prior{Eigen::Vector2d(0.0, 0.0), Eigen::Matrix2d{{1.0, 0.0}, {0.0, 4.0}}};

  std::vector<double> measurements(std::size_t steps) const {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Vector2d x(0.0, 1.0);
    std::vector<double> z;
    for (std::size_t t = 0; t < steps; ++t) {
      if (t > 0) x = a * x + Eigen::Vector2d(0.1 * n(rng), 0.2 * n(rng));
      z.push_back(x[0] + 0.5 * n(rng));
    }
    return z;
  }
  Eigen::MatrixXd q() const { return Eigen::Vector2d(temperature_variance, flux_variance).asDiagonal(); }
};

}  // namespace

Check linear_kalman(std::size_t lag, std::size_t steps) {
  const LinearCase lc;
  const auto z = lc.measurements(steps);
  const LinearTransferModel model(lc.a, lc.h);
  SmootherOptions opts;
  opts.lag = lag;
  FixedLagSmoother<LinearTransferModel> smoother(model, NoiseModel::diagonal(2, lc.temperature_variance,
                                                                             lc.flux_variance, lc.r),
                                                 GaussianState{lc.prior.mean, lc.prior.cov}, opts);
  double worst = 0.0;
  for (std::size_t t = 0; t < z.size(); ++t) {
    const auto e = smoother.push(z[t]);
    if (!e) continue;
    // Fixed-lag output equals the fixed-interval smoother over the data seen so far.
    const std::vector<double> seen(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(t + 1));
    const auto ref = rts_smoother(lc.a, lc.q(), kalman_filter(lc.a, lc.h, lc.q(), lc.r, lc.prior, seen));
    worst = std::max(worst, (e->mean - ref[e->step].mean).cwiseAbs().maxCoeff());
    worst = std::max(worst, (e->cov - ref[e->step].cov).cwiseAbs().maxCoeff());
  }
  return finish("linear EKF/RTS matches dense Kalman smoother", worst, 1e-10,
                "lag " + std::to_string(lag) + ", " + std::to_string(steps) + " steps");
}

Check zero_lag_identity(std::size_t steps) {
  const LinearCase lc;
  const auto z = lc.measurements(steps);
  const LinearTransferModel model(lc.a, lc.h);
  SmootherOptions opts;
  opts.lag = 0;
  FixedLagSmoother<LinearTransferModel> smoother(model, NoiseModel::diagonal(2, lc.temperature_variance,
                                                                             lc.flux_variance, lc.r),
                                                 GaussianState{lc.prior.mean, lc.prior.cov}, opts);
  double worst = 0.0;
  for (double v : z) {
    const auto e = smoother.push(v);
    const auto f = smoother.filtered();
    if (!e) return finish("zero lag returns the filter", INFINITY, 0.0, "no emission at lag 0");
    worst = std::max(worst, (e->mean - f.mean).cwiseAbs().maxCoeff());
    worst = std::max(worst, (e->cov - f.cov).cwiseAbs().maxCoeff());
  }
  return finish("zero lag returns the filter", worst, 0.0);
}

Check weight_jacobian(int nets, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> width(1, 12);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int n = 0; n < nets; ++n) {
    std::vector<int> sizes{width(rng)};
    const int hidden = 1 + n % 2;
    for (int h = 0; h < hidden; ++h) sizes.push_back(width(rng));
    sizes.push_back(1 + width(rng) % 6);
    const MlpModel model = MlpModel::random(sizes, rng());
    Eigen::VectorXd x(sizes.front());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
    const Eigen::MatrixXd bp = jacobian_wrt_weights(model, x);
    const Eigen::MatrixXd fd = finite_difference_weights(model, x, 1e-6);
    const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
    worst = std::max(worst, (bp - fd).cwiseAbs().maxCoeff() / scale);
  }
  return finish("weight Jacobian matches central differences", worst, 1e-5, std::to_string(nets) + " random nets");
}

std::vector<Check> all_checks() {
  return {forward_solver(), energy_balance(), linear_kalman(), zero_lag_identity(), weight_jacobian()};
}

}  // namespace ihtp::oracle
