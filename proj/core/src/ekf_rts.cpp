#include "ihtp/ekf_rts.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace ihtp {

void NoiseModel::validate(Eigen::Index dim) const {
  require(process.rows() == dim && process.cols() == dim, ErrorKind::InvalidArgument,
          "NoiseModel: process covariance has the wrong dimension");
  require(std::isfinite(measurement_variance) && measurement_variance > 0.0, ErrorKind::InvalidArgument,
          "NoiseModel: measurement variance must be positive");
  require(covariance_ok(process), ErrorKind::InvalidArgument, "NoiseModel: process covariance is not PSD");
}

NoiseModel NoiseModel::diagonal(Eigen::Index dim, double temperature_variance, double flux_variance,
                                double measurement_variance) {
  NoiseModel n;
  n.process = Eigen::MatrixXd::Zero(dim, dim);
  n.process.diagonal().setConstant(temperature_variance);
  n.process(dim - 1, dim - 1) = flux_variance;
  n.measurement_variance = measurement_variance;
  return n;
}

void CovarianceDiagnostics::merge(const CovarianceDiagnostics& o) {
  checks += o.checks;
  failures += o.failures;
  repairs += o.repairs;
  regularized_solves += o.regularized_solves;
  max_asymmetry = std::max(max_asymmetry, o.max_asymmetry);
}

void symmetrize(Eigen::MatrixXd& cov) {
  cov = 0.5 * (cov + cov.transpose()).eval();
}

namespace {

Eigen::VectorXd scale_of(const Eigen::MatrixXd& cov) {
  const double top = std::max(cov.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  return cov.diagonal().cwiseMax(1e-30 * top).cwiseSqrt();
}

}  // namespace

bool covariance_ok(const Eigen::MatrixXd& cov, double* asymmetry) {
  if (cov.rows() != cov.cols() || !cov.allFinite()) return false;
  const double top = cov.cwiseAbs().maxCoeff();
  const double asym = top > 0.0 ? (cov - cov.transpose()).cwiseAbs().maxCoeff() / top : 0.0;
  if (asymmetry) *asymmetry = asym;
  if (asym > 1e-9) return false;
  if (top == 0.0) return true;
  const Eigen::VectorXd d = scale_of(cov).cwiseInverse();
  Eigen::MatrixXd c = d.asDiagonal() * cov * d.asDiagonal();
  c.diagonal().array() += 1e-12;
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  return llt.info() == Eigen::Success;
}

void project_psd(Eigen::MatrixXd& cov) {
  symmetrize(cov);
  const Eigen::VectorXd d = scale_of(cov);
  const Eigen::VectorXd inv = d.cwiseInverse();
  Eigen::MatrixXd c = inv.asDiagonal() * cov * inv.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  c = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
  cov = d.asDiagonal() * c * d.asDiagonal();
  symmetrize(cov);
}

GaussianState correct(const GaussianState& predicted, double measurement, const Eigen::RowVectorXd& h,
                      const NoiseModel& noise, CovarianceDiagnostics* diag) {
  const Eigen::VectorXd ph = predicted.cov * h.transpose();
  const double innovation_var = h.dot(ph) + noise.measurement_variance;
  require(innovation_var > 0.0 && std::isfinite(innovation_var), ErrorKind::Internal,
          "correct: innovation variance is not positive");
  const Eigen::VectorXd gain = ph / innovation_var;
  GaussianState out;
  out.mean = predicted.mean + gain * (measurement - h.dot(predicted.mean));
  // P - K h P with K h P = ph ph^T / s.
  out.cov = predicted.cov - gain * ph.transpose();
  symmetrize(out.cov);
  if (!covariance_ok(out.cov)) {
    project_psd(out.cov);
    if (diag) ++diag->repairs;
  }
  return out;
}

Eigen::MatrixXd smoother_gain(const Eigen::MatrixXd& filtered_cov, const Eigen::MatrixXd& jacobian,
                              const Eigen::MatrixXd& next_predicted_cov, CovarianceDiagnostics* diag) {
  // G^T = Ppred^{-1} (F P), solved in correlation scaling for conditioning.
  const Eigen::VectorXd d = scale_of(next_predicted_cov);
  const Eigen::VectorXd inv = d.cwiseInverse();
  Eigen::MatrixXd scaled = inv.asDiagonal() * next_predicted_cov * inv.asDiagonal();
  Eigen::MatrixXd rhs = inv.asDiagonal() * (jacobian * filtered_cov);
  Eigen::LLT<Eigen::MatrixXd> llt(scaled);
  if (llt.info() != Eigen::Success) {
    scaled.diagonal().array() += 1e-12;
    llt.compute(scaled);
    if (diag) ++diag->regularized_solves;
    require(llt.info() == Eigen::Success, ErrorKind::Numerical, "smoother_gain: predicted covariance is singular");
  }
  const Eigen::MatrixXd gt = inv.asDiagonal() * llt.solve(rhs);
  return gt.transpose();
}

void LagWindow::push(StepRecord record) {
  records_.push_back(std::move(record));
  while (records_.size() > lag_ + 1) records_.pop_front();
}

std::vector<SmoothedStep> rts_backward(const LagWindow& window, RtsForm form, bool smooth_covariance,
                                       CovarianceDiagnostics* diag) {
  (void)diag;
  const std::size_t n = window.size();
  require(n >= 1, ErrorKind::InvalidArgument, "rts_backward: empty window");
  std::vector<SmoothedStep> out(n);
  out[n - 1].mean = window[n - 1].filtered_mean;
  if (smooth_covariance) out[n - 1].cov = window[n - 1].filtered_cov;
  for (std::size_t k = n - 1; k-- > 0;) {
    const StepRecord& rec = window[k];
    const StepRecord& next = window[k + 1];
    require(rec.gain.size() > 0, ErrorKind::Internal, "rts_backward: record has no smoother gain");
    const Eigen::VectorXd& reference = form == RtsForm::Standard ? next.predicted_mean : next.filtered_mean;
    out[k].mean = rec.filtered_mean + rec.gain * (out[k + 1].mean - reference);
    if (smooth_covariance) {
      out[k].cov = rec.filtered_cov + rec.gain * (out[k + 1].cov - next.predicted_cov) * rec.gain.transpose();
      symmetrize(out[k].cov);
    }
  }
  return out;
}

}  // namespace ihtp
