#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ihtp/inversion.hpp"

namespace ihtp {

/// Persisted sweep cells, keyed by a hash of everything that determines them.
/// An empty directory keeps results in memory only.
class ResultStore {
 public:
  explicit ResultStore(std::filesystem::path dir = {});

  std::optional<nlohmann::json> find(const std::string& key) const;
  void put(const std::string& key, const nlohmann::json& value);
  const std::filesystem::path& directory() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::map<std::string, nlohmann::json> memory_;
};

/// Runs body(0..count-1) on up to `jobs` threads; the first exception is rethrown.
void parallel_for(std::size_t jobs, std::size_t count, const std::function<void(std::size_t)>& body);

double median(std::vector<double> values);

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// AE per testing family, each normalized by the family's own max |q|.
std::map<std::string, double> family_errors(const InversionResult& result,
                                            std::span<const RenderedSignal::Section> sections);

/// AE above this (or non-finite) marks a divergent run.
inline constexpr double kDivergenceThreshold = 1.0;

struct SweepSpec {
  InversionConfig base;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t jobs = 1;

  std::vector<std::vector<std::string>> exclusions;  // ablation
  int sensor_stride = 2;                              // sensor sweep, every n-th interior cell
  std::vector<std::size_t> nf_values;                 // future-step sweep
  std::vector<std::pair<double, double>> sensors;     // future-step sweep
  int timing_repeats = 15;                            // future-step sweep, min over repeats
  std::vector<double> noise_levels{2.0, 5.0, 10.0, 15.0};
  bool include_cfd = true;                            // comparison
  std::size_t cfd_horizon = 200;

  void validate() const;
  nlohmann::json to_json() const;
};

/// One run of one sweep cell for one seed.
struct Replicate {
  std::map<std::string, std::string> labels;
  std::uint64_t seed = 0;
  double ae = 0.0;
  double mean_step_ms = 0.0;
  double p95_step_ms = 0.0;
  bool divergent = false;
  std::map<std::string, double> metrics;  // extra per-run values, e.g. per-family AE
  std::string key;
  std::string error;  // set when the run threw

  nlohmann::json to_json() const;
  static Replicate from_json(const nlohmann::json& doc);
};

/// Long-format CSV, one row per replicate, label columns first.
void write_replicates_csv(const std::filesystem::path& path, std::span<const Replicate> rows);

struct AblationRow {
  std::size_t id = 0;
  std::vector<std::string> excluded;
  std::map<std::string, double> family_ae;  // median over seeds, per testing family
  double overall_ae = 0.0;
  bool divergent = false;
  std::string manifest_hash;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<Replicate> replicates;
  nlohmann::json to_json() const;
};

/// The fifteen exclusion sets: none, each single family, six pairs, four triples.
std::vector<std::vector<std::string>> standard_exclusions();

AblationResult ablation_study(const Scenario& scenario, const SweepSpec& spec, ResultStore& store);

struct SensorCell {
  CellIndex cell;
  double x = 0.0;
  double y = 0.0;
  double ae = 0.0;
  bool divergent = false;
};

struct SensorSweepResult {
  std::vector<SensorCell> cells;
  std::vector<Replicate> replicates;
  nlohmann::json to_json() const;
  /// nx x ny grid of AE with empty entries for skipped cells, row 0 at the bottom wall.
  void write_heatmap_csv(const std::filesystem::path& path, const Mesh& mesh) const;
};

/// Interior cells with all four neighbours, every `stride`-th in each direction.
std::vector<CellIndex> sweep_cells(const Mesh& mesh, int stride);

SensorSweepResult sensor_location_sweep(const Scenario& scenario, const SweepSpec& spec, ResultStore& store);

struct NfPoint {
  double x = 0.0;
  double y = 0.0;
  std::size_t nf = 0;
  double ae = 0.0;            // median over seeds
  double cpu_step_ms = 0.0;   // thread CPU time per step, min over timing repeats
};

struct NfSweepResult {
  std::vector<NfPoint> points;
  std::vector<LinearFit> timing_fits;  // one per sensor, time ~ a + b nf
  std::vector<Replicate> replicates;
  nlohmann::json to_json() const;
};

/// Default sensors for the future-step sweep.
std::vector<std::pair<double, double>> default_nf_sensors();

NfSweepResult future_step_sweep(const Scenario& scenario, const SweepSpec& spec, ResultStore& store);

struct ComparisonRow {
  Algorithm algorithm = Algorithm::AnnEks;
  double noise = 0.0;
  std::size_t horizon = 0;  // 0 = whole testing signal
  double ae = 0.0;  // median over seeds
  double mean_step_ms = 0.0;
  std::vector<double> replicate_ae;
};

struct ComparisonResult {
  std::vector<ComparisonRow> rows;
  std::vector<Replicate> replicates;
  nlohmann::json to_json() const;
  const ComparisonRow* find(Algorithm algorithm, double noise, std::size_t horizon = 0) const;
};

/// Paired-seed comparison: every algorithm sees the same noisy stream per (noise, seed).
/// ANN-EKS and the inverse ANN run on the whole signal; when CFD-EKS is included it
/// and a second ANN-EKS run cover the leading cfd_horizon steps.
ComparisonResult algorithm_comparison(const Scenario& scenario, const SweepSpec& spec, ResultStore& store);

}  // namespace ihtp
