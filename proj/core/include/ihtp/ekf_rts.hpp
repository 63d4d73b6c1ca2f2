#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ihtp/error.hpp"
#include "ihtp/transfer_models.hpp"

namespace ihtp {

struct GaussianState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct NoiseModel {
  Eigen::MatrixXd process;           // Q
  double measurement_variance = 1.0; // R

  void validate(Eigen::Index dim) const;
  /// Diagonal Q: `temperature_variance` on every component but the last, `flux_variance` on the last.
  static NoiseModel diagonal(Eigen::Index dim, double temperature_variance, double flux_variance,
                             double measurement_variance);
};

/// Running record of covariance health over a filter run.
struct CovarianceDiagnostics {
  std::size_t checks = 0;
  std::size_t failures = 0;          // matrices that failed symmetry or PSD before repair
  std::size_t repairs = 0;           // eigenvalue clips applied after an update
  std::size_t regularized_solves = 0;
  double max_asymmetry = 0.0;        // max |P - P^T| / max |P|

  void merge(const CovarianceDiagnostics& other);
  bool healthy() const { return failures == 0; }
};

/// Symmetry to 1e-9 relative and Cholesky success on the correlation-scaled
/// matrix plus 1e-12 I.
bool covariance_ok(const Eigen::MatrixXd& cov, double* asymmetry = nullptr);
void symmetrize(Eigen::MatrixXd& cov);
/// Clips negative eigenvalues to zero.
void project_psd(Eigen::MatrixXd& cov);

struct Prediction {
  GaussianState state;
  Eigen::MatrixXd jacobian;  // F evaluated at the prior mean
};

/// x_pred = f(x), P_pred = F P F^T + Q.
template <TransferModel Model>
Prediction predict(const GaussianState& belief, const Model& model, const NoiseModel& noise) {
  Prediction out;
  out.jacobian = model.jacobian(belief.mean);
  out.state.mean = model.transfer(belief.mean);
  require(out.state.mean.allFinite(), ErrorKind::Numerical, "predict: transfer produced a non-finite state");
  out.state.cov = out.jacobian * belief.cov * out.jacobian.transpose() + noise.process;
  symmetrize(out.state.cov);
  return out;
}

/// Scalar-measurement update with gain K = P h^T / (h P h^T + R).
GaussianState correct(const GaussianState& predicted, double measurement, const Eigen::RowVectorXd& h,
                      const NoiseModel& noise, CovarianceDiagnostics* diag = nullptr);

enum class RtsForm {
  Standard,            // x'_k = x_k + G (x'_{k+1} - xpred_{k+1})
  FilteredDifference,  // x'_k = x_k + G (x'_{k+1} - x_{k+1})
};

/// Per-step filter record kept in the lag window.
struct StepRecord {
  Eigen::VectorXd predicted_mean;
  Eigen::VectorXd filtered_mean;
  Eigen::MatrixXd predicted_cov;  // may be released once no longer needed
  Eigen::MatrixXd filtered_cov;
  Eigen::MatrixXd jacobian;       // F_k: linearization used to predict step k+1
  Eigen::MatrixXd gain;           // G_k, filled once step k+1 is predicted
};

/// G_k = P_k F_k^T (Ppred_{k+1})^{-1}.
Eigen::MatrixXd smoother_gain(const Eigen::MatrixXd& filtered_cov, const Eigen::MatrixXd& jacobian,
                              const Eigen::MatrixXd& next_predicted_cov, CovarianceDiagnostics* diag = nullptr);

/// Sliding window of the last lag+1 records.
class LagWindow {
 public:
  explicit LagWindow(std::size_t lag) : lag_(lag) {}

  std::size_t lag() const { return lag_; }
  bool warm() const { return records_.size() == lag_ + 1; }
  std::size_t size() const { return records_.size(); }
  /// Appends and drops the oldest record beyond lag+1.
  void push(StepRecord record);
  StepRecord& back() { return records_.back(); }
  const StepRecord& back() const { return records_.back(); }
  const StepRecord& operator[](std::size_t i) const { return records_[i]; }
  StepRecord& operator[](std::size_t i) { return records_[i]; }

 private:
  std::size_t lag_;
  std::deque<StepRecord> records_;
};

struct SmoothedStep {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // empty unless covariances were smoothed
};

/// Backward pass over the whole window, oldest record first in the result. The
/// newest record is returned unchanged.
std::vector<SmoothedStep> rts_backward(const LagWindow& window, RtsForm form = RtsForm::Standard,
                                       bool smooth_covariance = true, CovarianceDiagnostics* diag = nullptr);

struct SmootherOptions {
  std::size_t lag = 18;
  RtsForm form = RtsForm::Standard;
  bool smooth_covariance = true;
  bool check_covariance = true;
};

struct Emission {
  std::size_t step = 0;  // index of the estimated state
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;   // smoothed when available, else filtered
  double flux() const { return mean[mean.size() - 1]; }
};

/// Online fixed-lag estimator. push() consumes the measurement of step k and,
/// once lag+1 records exist, returns the smoothed state of step k - lag.
template <TransferModel Model>
class FixedLagSmoother {
 public:
  FixedLagSmoother(const Model& model, NoiseModel noise, GaussianState prior, SmootherOptions options = {})
      : model_(model), noise_(std::move(noise)), prior_(std::move(prior)), options_(options),
        window_(options.lag) {
    noise_.validate(model_.dimension());
    require(prior_.mean.size() == model_.dimension() && prior_.cov.rows() == model_.dimension() &&
                prior_.cov.cols() == model_.dimension(),
            ErrorKind::InvalidArgument, "FixedLagSmoother: prior does not match the model dimension");
    h_ = model_.measurement_row();
  }

  std::optional<Emission> push(double measurement) {
    require(std::isfinite(measurement), ErrorKind::Numerical, "FixedLagSmoother: non-finite measurement");
    StepRecord rec;
    if (steps_ == 0) {
      rec.predicted_mean = prior_.mean;
      rec.predicted_cov = prior_.cov;
    } else {
      StepRecord& prev = window_.back();
      Prediction p = predict(GaussianState{prev.filtered_mean, prev.filtered_cov}, model_, noise_);
      check(p.state.cov);
      if (options_.lag > 0) prev.gain = smoother_gain(prev.filtered_cov, p.jacobian, p.state.cov, &diag_);
      if (!options_.smooth_covariance) {
        prev.predicted_cov.resize(0, 0);
        prev.filtered_cov.resize(0, 0);
      } else {
        prev.jacobian = std::move(p.jacobian);
      }
      rec.predicted_mean = std::move(p.state.mean);
      rec.predicted_cov = std::move(p.state.cov);
    }
    GaussianState filtered =
        correct(GaussianState{rec.predicted_mean, rec.predicted_cov}, measurement, h_, noise_, &diag_);
    check(filtered.cov);
    rec.filtered_mean = std::move(filtered.mean);
    rec.filtered_cov = std::move(filtered.cov);
    window_.push(std::move(rec));
    ++steps_;

    if (!window_.warm()) return std::nullopt;
    Emission e;
    e.step = steps_ - 1 - options_.lag;
    if (options_.lag == 0) {
      e.mean = window_[0].filtered_mean;
      e.cov = window_[0].filtered_cov;
      return e;
    }
    auto smoothed = rts_backward(window_, options_.form, options_.smooth_covariance, &diag_);
    if (options_.smooth_covariance)
      for (const auto& s : smoothed) check(s.cov);
    e.mean = std::move(smoothed.front().mean);
    e.cov = options_.smooth_covariance ? std::move(smoothed.front().cov) : Eigen::MatrixXd();
    return e;
  }

  /// The most recent filtered (unsmoothed) state.
  GaussianState filtered() const { return {window_.back().filtered_mean, window_.back().filtered_cov}; }
  std::size_t steps() const { return steps_; }
  /// Measurements still needed before the first emission.
  std::size_t warmup_shortfall() const { return steps_ >= options_.lag + 1 ? 0 : options_.lag + 1 - steps_; }
  const CovarianceDiagnostics& diagnostics() const { return diag_; }

 private:
  void check(const Eigen::MatrixXd& cov) {
    if (!options_.check_covariance || cov.size() == 0) return;
    double asym = 0.0;
    ++diag_.checks;
    if (!covariance_ok(cov, &asym)) ++diag_.failures;
    diag_.max_asymmetry = std::max(diag_.max_asymmetry, asym);
  }

  const Model& model_;
  NoiseModel noise_;
  GaussianState prior_;
  SmootherOptions options_;
  LagWindow window_;
  Eigen::RowVectorXd h_;
  std::size_t steps_ = 0;
  CovarianceDiagnostics diag_;
};

}  // namespace ihtp
