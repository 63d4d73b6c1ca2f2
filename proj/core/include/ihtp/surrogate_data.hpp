#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "ihtp/flux_signals.hpp"
#include "ihtp/physics.hpp"

namespace ihtp {

inline constexpr int kReducedDim = 6;
inline constexpr int kLocalDim = 5;

/// Component order of the reduced state: sensor cell, its +x/-x and +y/-y
/// neighbours, then the wall flux.
enum ReducedComponent : int { kSensor = 0, kXPlus = 1, kXMinus = 2, kYPlus = 3, kYMinus = 4, kFlux = 5 };

using ReducedVector = Eigen::Matrix<double, kReducedDim, 1>;
using LocalTemps = Eigen::Matrix<double, kLocalDim, 1>;

/// The five cells whose temperatures enter the reduced state, one-cell offsets.
struct LocalStencil {
  CellIndex sensor;

  std::array<CellIndex, kLocalDim> cells() const;
  /// Throws if any neighbour falls outside the mesh.
  void validate(const Mesh& mesh) const;
  nlohmann::json to_json() const;
};

struct ReducedState {
  ReducedVector values = ReducedVector::Zero();

  double sensor() const { return values[kSensor]; }
  double flux() const { return values[kFlux]; }
  LocalTemps temperatures() const { return values.head<kLocalDim>(); }
};

ReducedState extract_local_state(const TemperatureField& field, const Mesh& mesh, CellIndex sensor, double q);
LocalTemps extract_local_temperatures(const Eigen::Ref<const Eigen::VectorXd>& field, const Mesh& mesh,
                                      const LocalStencil& stencil);

enum class SampleTag : std::uint8_t { Transfer, Sensitivity };

/// Input/output rows in physical units (K, W/m^2). Row r is one sample.
struct Dataset {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd outputs;
  std::vector<SampleTag> tags;
  std::vector<std::string> input_names;
  std::vector<std::string> output_names;

  Eigen::Index rows() const { return inputs.rows(); }
  Dataset subset(std::span<const std::size_t> indices) const;
};

const std::vector<std::string>& reduced_input_names();
const std::vector<std::string>& reduced_output_names();

struct PerturbationSpec {
  double relative = 1e-4;
  double absolute_floor = 1e-6;

  /// Perturbation magnitude for a component with value x.
  double step(double x) const;
};

struct SurrogateDatasets {
  Dataset transfer;
  Dataset sensitivity;
};

/// Runs the forward solver under `signal` and records, per step, one unperturbed
/// transfer sample and twelve +/- perturbed sensitivity samples (one per reduced
/// component and sign). A temperature perturbation is embedded in the matching
/// cell of the full field before advancing; a flux perturbation changes the step's q.
SurrogateDatasets generate_datasets(const FluxSignal& signal, const Mesh& mesh, const PhysicalParams& params,
                                    CellIndex sensor, const PerturbationSpec& perturbation = {});

/// Provenance record hashed into model files.
nlohmann::json dataset_manifest(const SignalManifest& signal, const Mesh& mesh, const PhysicalParams& params,
                                CellIndex sensor, const PerturbationSpec& perturbation);

/// Per-channel z-score using the population standard deviation.
class ChannelScaler {
 public:
  ChannelScaler() = default;
  ChannelScaler(std::vector<std::string> names, Eigen::VectorXd mean, Eigen::VectorXd stddev);

  /// Throws ErrorKind::InvalidArgument naming the first constant channel.
  static ChannelScaler fit(const Eigen::MatrixXd& rows, std::vector<std::string> names);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& rows) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::VectorXd invert(const Eigen::VectorXd& v) const;

  Eigen::Index channels() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return std_; }
  const std::vector<std::string>& names() const { return names_; }

  nlohmann::json to_json() const;
  static ChannelScaler from_json(const nlohmann::json& doc);

 private:
  std::vector<std::string> names_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd std_;
};

struct Standardizer {
  ChannelScaler input;
  ChannelScaler output;

  static Standardizer fit(const Dataset& data);
};

struct SplitFractions {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Seeded random partition of [0, n). Sizes are round(n*train), round(n*validation), rest.
SplitIndices split(std::size_t n, const SplitFractions& fractions, std::uint64_t seed);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace ihtp
