#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ihtp/ekf_rts.hpp"
#include "ihtp/flux_signals.hpp"
#include "ihtp/mlp.hpp"
#include "ihtp/physics.hpp"
#include "ihtp/surrogates.hpp"
#include "ihtp/transfer_models.hpp"

namespace ihtp {

enum class Algorithm { AnnEks, CfdEks, InverseAnn };
std::string to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& name);

/// Deterministic per-consumer seed derived from a run's root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view consumer);

/// y_k = T_k + m * N(0, 1), seeded.
std::vector<double> add_noise(std::span<const double> series, double m, std::uint64_t seed);

/// RMS of (q_true - q_est) / max|q_true|.
double average_error(std::span<const double> q_true, std::span<const double> q_est);

struct FilterTuning {
  double temperature_process_variance = 1e-4;  // K^2 per step
  double flux_process_variance = 2500.0;       // (W/m^2)^2 per step
  double prior_temperature_variance = 1.0;
  double prior_flux_variance = 1e6;
  double min_measurement_variance = 1e-4;      // R floor used when m = 0
  RtsForm form = RtsForm::Standard;

  nlohmann::json to_json() const;
};

inline constexpr std::size_t kSymmetricWindow = std::numeric_limits<std::size_t>::max();

struct InversionConfig {
  Algorithm algorithm = Algorithm::AnnEks;
  double sensor_x = 0.820;
  double sensor_y = 0.089;
  std::size_t nf = 18;
  double noise = 5.0;
  std::uint64_t seed = 1;
  std::size_t horizon = 0;  // leading steps of the testing signal to use; 0 = all (CFD: 200)
  FilterTuning filter;
  std::size_t inverse_np = kSymmetricWindow;  // past window of the inverse network; default nf
  double inverse_training_noise = 0.0;

  void validate() const;
  std::size_t past_window() const { return inverse_np == kSymmetricWindow ? nf : inverse_np; }
  nlohmann::json to_json() const;
};

/// Sensor readings z_0..z_N for a flux signal of N samples; z_k is the sensor
/// temperature after k steps, so z_0 is the initial field.
struct MeasurementStream {
  FluxSignal truth;
  CellIndex sensor;
  std::vector<double> clean;
  std::vector<double> noisy;
};

MeasurementStream make_measurements(const FluxSignal& truth, const Mesh& mesh, const PhysicalParams& params,
                                    CellIndex sensor, double noise, std::uint64_t seed);

struct InversionResult {
  Algorithm algorithm = Algorithm::AnnEks;
  std::vector<std::size_t> steps;  // estimated step indices
  std::vector<double> q_true;
  std::vector<double> q_hat;
  std::vector<double> measured;    // z at each estimated step
  double ae = 0.0;
  double mean_step_ms = 0.0;
  double p95_step_ms = 0.0;
  double cpu_step_ms = 0.0;        // thread CPU time per measurement
  std::size_t total_steps = 0;     // measurements consumed
  std::size_t warmup_shortfall = 0;
  CovarianceDiagnostics covariance;

  nlohmann::json summary() const;
  void write_csv(const std::filesystem::path& path, double dt) const;
};

/// Reduced-state filter prior: inlet temperature everywhere, zero flux.
GaussianState reduced_prior(const PhysicalParams& params, const FilterTuning& tuning);
NoiseModel filter_noise(Eigen::Index dim, const FilterTuning& tuning, double m);

InversionResult run_ann_eks(const ReducedAnnModel& model, const MeasurementStream& stream,
                            const PhysicalParams& params, const InversionConfig& config);
InversionResult run_cfd_eks(const CfdTransferModel& model, const MeasurementStream& stream,
                            const PhysicalParams& params, const InversionConfig& config);

/// MLP from [z_{k-np} .. z_{k+nf}] to q_k, trained on the corpus' sensor series.
MlpModel train_inverse_ann(const FluxSignal& corpus, const Mesh& mesh, const PhysicalParams& params,
                           CellIndex sensor, std::size_t np, std::size_t nf, double training_noise,
                           std::uint64_t seed, const FitOptions& fit = {});
InversionResult run_inverse_ann(const MlpModel& model, const MeasurementStream& stream,
                                const InversionConfig& config);

/// Everything an inversion needs besides its config.
struct Scenario {
  Mesh mesh;
  PhysicalParams params;
  SignalManifest training = builtin_training_manifest();
  SignalManifest testing = builtin_testing_manifest();
  SurrogateConfig surrogates;
  FitOptions inverse_fit;
  std::filesystem::path cache_dir;
  bool train_missing = true;  // off: a model absent from cache_dir is an error

  nlohmann::json to_json() const;
};

MlpModel load_or_train_inverse_ann(const Scenario& scenario, CellIndex sensor, const InversionConfig& config);
SurrogatePair load_or_train_surrogates(const Scenario& scenario, CellIndex sensor);

/// Builds models (through the cache), measurements and runs the configured algorithm.
InversionResult run_inversion(const InversionConfig& config, const Scenario& scenario);

}  // namespace ihtp
