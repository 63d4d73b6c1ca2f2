#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ihtp/flux_signals.hpp"
#include "ihtp/mlp.hpp"
#include "ihtp/physics.hpp"
#include "ihtp/surrogate_data.hpp"
#include "ihtp/transfer_models.hpp"

namespace ihtp {

struct FitOptions {
  std::vector<int> hidden{10};
  TrainConfig train;
  SplitFractions fractions;
  std::uint64_t split_seed = 7;

  nlohmann::json to_json() const;
};

/// Standardizes on the training split, trains with LM and scores the test split.
TrainResult fit_network(const Dataset& data, const FitOptions& options);

/// Transfer networks from several initializations are scored by a closed-loop
/// ANN-EKS run over the training signal; the lowest AE wins.
struct TransferSelection {
  int candidates = 16;
  double noise = 5.0;
  std::size_t nf = 18;
  std::uint64_t seed = 17;

  nlohmann::json to_json() const;
};

struct SurrogateConfig {
  FitOptions transfer;
  FitOptions sensitivity;
  PerturbationSpec perturbation;
  TransferSelection selection;

  SurrogateConfig();
  nlohmann::json to_json() const;
};

struct CandidateScore {
  std::uint64_t seed = 0;
  double ae = 0.0;  // infinity when the closed-loop run failed
};

struct SurrogatePair {
  MlpModel transfer;
  MlpModel sensitivity;
  TrainReport transfer_report;
  TrainReport sensitivity_report;
  std::vector<CandidateScore> candidates;
  double training_seconds = 0.0;  // datasets, every candidate and the selection runs
  std::string manifest_hash;
  CellIndex sensor;

  ReducedAnnModel reduced_model(JacobianStep step = {}) const;
  nlohmann::json to_json() const;
  static SurrogatePair from_json(const nlohmann::json& doc);
};

SurrogatePair train_surrogates(const SignalManifest& manifest, const Mesh& mesh, const PhysicalParams& params,
                               CellIndex sensor, const SurrogateConfig& config = {});

/// Cache key over everything that determines a trained pair.
std::string surrogate_key(const SignalManifest& manifest, const Mesh& mesh, const PhysicalParams& params,
                          CellIndex sensor, const SurrogateConfig& config);

std::filesystem::path surrogate_path(const std::filesystem::path& cache_dir, const SignalManifest& manifest,
                                     const Mesh& mesh, const PhysicalParams& params, CellIndex sensor,
                                     const SurrogateConfig& config);

/// Loads `<cache_dir>/surrogates-<key>.json` or trains and stores it. An empty
/// cache_dir disables caching. With train_missing off, a missing file throws ErrorKind::Io.
SurrogatePair load_or_train_surrogates(const std::filesystem::path& cache_dir, const SignalManifest& manifest,
                                       const Mesh& mesh, const PhysicalParams& params, CellIndex sensor,
                                       const SurrogateConfig& config = {}, bool train_missing = true);

/// IHTP_CACHE_DIR if set, else `fallback`.
std::filesystem::path cache_directory(const std::filesystem::path& fallback = ".ihtp-cache");

}  // namespace ihtp
