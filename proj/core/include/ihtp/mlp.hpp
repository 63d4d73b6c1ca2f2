#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "ihtp/surrogate_data.hpp"

namespace ihtp {

struct DenseLayer {
  Eigen::MatrixXd weights;  // outputs x inputs
  Eigen::VectorXd biases;
};

/// Fully connected network: tanh on every hidden layer, identity on the output.
/// Works in standardized units; `standardizer` (when present) maps physical values.
class MlpModel {
 public:
  MlpModel() = default;

  static MlpModel zeros(std::vector<int> layer_sizes);
  /// Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static MlpModel random(std::vector<int> layer_sizes, std::uint64_t seed);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int inputs() const { return sizes_.front(); }
  int outputs() const { return sizes_.back(); }
  Eigen::Index parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Flattened as, per layer, the weights row by row followed by the biases.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::Ref<const Eigen::VectorXd>& theta);

  /// Physical-unit evaluation through the attached standardizer.
  Eigen::VectorXd predict(const Eigen::VectorXd& physical_input) const;

  std::optional<Standardizer> standardizer;
  std::string manifest_hash;
  nlohmann::json metadata = nlohmann::json::object();

  nlohmann::json to_json() const;
  static MlpModel from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static MlpModel load(const std::filesystem::path& path);

 private:
  explicit MlpModel(std::vector<int> sizes);
  std::vector<int> sizes_;
  std::vector<DenseLayer> layers_;
};

/// Evaluation in standardized units.
Eigen::VectorXd forward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input);
/// Row-per-sample batch evaluation.
Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& inputs);

/// d(output)/d(parameter), outputs x parameter_count, parameters ordered as in MlpModel::parameters.
Eigen::MatrixXd jacobian_wrt_weights(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input);

/// Mean of squared errors over every output element.
double mean_squared_error(const MlpModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

/// Pearson correlation between flattened predictions and targets.
double regression_r(const MlpModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);
double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

struct TrainConfig {
  int max_iterations = 1000;
  int patience = 6;                 // accepted iterations without validation improvement
  double initial_damping = 1e-3;
  double damping_increase = 10.0;
  double damping_decrease = 10.0;
  double max_damping = 1e10;
  double min_gradient = 1e-12;      // stop when max |J^T r| falls below this
  double goal_mse = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
};

enum class StopReason { MaxIterations, ValidationPatience, DampingLimit, MinGradient, Goal };
std::string to_string(StopReason reason);

struct TrainReport {
  int iterations = 0;
  double train_mse = 0.0;
  double validation_mse = 0.0;
  double test_mse = 0.0;
  double regression_r = 0.0;
  StopReason stop_reason = StopReason::MaxIterations;
  int best_iteration = 0;
  std::vector<double> sse_history;  // training SSE after each accepted iteration
  double final_damping = 0.0;
  double seconds = 0.0;             // wall time of the fit
  TrainConfig config;

  nlohmann::json to_json() const;
};

/// Test seam: lets a caller substitute the validation MSE seen by the stop rule.
struct TrainHooks {
  std::function<double(int iteration, double validation_mse)> validation_override;
};

struct TrainResult {
  MlpModel model;
  TrainReport report;
};

/// Full-batch Levenberg-Marquardt on standardized data. Each iteration solves
/// (J^T J + lambda I) delta = J^T r, retrying with larger lambda until the
/// training SSE drops. Returns the parameters with the best validation MSE.
TrainResult train_levenberg_marquardt(MlpModel initial, const Eigen::MatrixXd& train_x,
                                      const Eigen::MatrixXd& train_y, const Eigen::MatrixXd& val_x,
                                      const Eigen::MatrixXd& val_y, const TrainConfig& config,
                                      const TrainHooks& hooks = {});

}  // namespace ihtp
