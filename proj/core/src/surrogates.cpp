#include "ihtp/surrogates.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>

#include "ihtp/error.hpp"
#include "ihtp/inversion.hpp"
#include "ihtp/io.hpp"

namespace ihtp {

nlohmann::json FitOptions::to_json() const {
  return {{"hidden", hidden},
          {"train", train.to_json()},
          {"fractions", {fractions.train, fractions.validation, fractions.test}},
          {"split_seed", split_seed}};
}

TrainResult fit_network(const Dataset& data, const FitOptions& options) {
  require(data.rows() >= 3, ErrorKind::InvalidArgument, "fit_network: dataset too small");
  const SplitIndices parts = split(static_cast<std::size_t>(data.rows()), options.fractions, options.split_seed);
  require(!parts.train.empty() && !parts.validation.empty(), ErrorKind::InvalidArgument,
          "fit_network: empty training or validation split");
  const Dataset train = data.subset(parts.train);
  const Dataset val = data.subset(parts.validation);
  const Standardizer scaler = Standardizer::fit(train);

  std::vector<int> sizes{static_cast<int>(data.inputs.cols())};
  sizes.insert(sizes.end(), options.hidden.begin(), options.hidden.end());
  sizes.push_back(static_cast<int>(data.outputs.cols()));
  MlpModel init = MlpModel::random(sizes, options.train.seed);

  const auto start = std::chrono::steady_clock::now();
  TrainResult result =
      train_levenberg_marquardt(std::move(init), scaler.input.apply(train.inputs), scaler.output.apply(train.outputs),
                                scaler.input.apply(val.inputs), scaler.output.apply(val.outputs), options.train);
  result.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!parts.test.empty()) {
    const Dataset test = data.subset(parts.test);
    const Eigen::MatrixXd tx = scaler.input.apply(test.inputs);
    const Eigen::MatrixXd ty = scaler.output.apply(test.outputs);
    result.report.test_mse = mean_squared_error(result.model, tx, ty);
    result.report.regression_r = parts.test.size() >= 2 ? regression_r(result.model, tx, ty) : 0.0;
  }
  result.model.standardizer = scaler;
  result.model.metadata["report"] = result.report.to_json();
  result.model.metadata["fit"] = options.to_json();
  return result;
}

SurrogateConfig::SurrogateConfig() {
  transfer.train.seed = 11;
  sensitivity.train.seed = 13;
}

nlohmann::json TransferSelection::to_json() const {
  return {{"candidates", candidates}, {"noise", noise}, {"nf", nf}, {"seed", seed}};
}

nlohmann::json SurrogateConfig::to_json() const {
  return {{"transfer", transfer.to_json()},
          {"sensitivity", sensitivity.to_json()},
          {"selection", selection.to_json()},
          {"perturbation", {{"relative", perturbation.relative}, {"absolute_floor", perturbation.absolute_floor}}}};
}

ReducedAnnModel SurrogatePair::reduced_model(JacobianStep step) const {
  return ReducedAnnModel(transfer, sensitivity, step, manifest_hash);
}

namespace {

nlohmann::json candidates_json(const std::vector<CandidateScore>& scores) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : scores)
    list.push_back({{"seed", c.seed}, {"AE", std::isfinite(c.ae) ? nlohmann::json(c.ae) : nlohmann::json()}});
  return list;
}

}  // namespace

nlohmann::json SurrogatePair::to_json() const {
  return {{"format", "ihtp-surrogates"},
          {"manifest_hash", manifest_hash},
          {"sensor", {sensor.i, sensor.j}},
          {"transfer", transfer.to_json()},
          {"sensitivity", sensitivity.to_json()},
          {"transfer_report", transfer_report.to_json()},
          {"sensitivity_report", sensitivity_report.to_json()},
          {"candidates", candidates_json(candidates)},
          {"training_seconds", training_seconds}};
}

namespace {

TrainReport report_from_json(const nlohmann::json& doc) {
  TrainReport r;
  r.iterations = doc.at("iterations").get<int>();
  r.train_mse = doc.at("train_mse").get<double>();
  r.validation_mse = doc.at("validation_mse").get<double>();
  r.test_mse = doc.at("test_mse").get<double>();
  r.regression_r = doc.at("regression_r").get<double>();
  r.best_iteration = doc.at("best_iteration").get<int>();
  r.final_damping = doc.at("final_damping").get<double>();
  r.sse_history = doc.at("sse_history").get<std::vector<double>>();
  r.seconds = doc.value("seconds", 0.0);
  const std::string reason = doc.at("stop_reason").get<std::string>();
  for (StopReason s : {StopReason::MaxIterations, StopReason::ValidationPatience, StopReason::DampingLimit,
                       StopReason::MinGradient, StopReason::Goal})
    if (to_string(s) == reason) r.stop_reason = s;
  return r;
}

}  // namespace

SurrogatePair SurrogatePair::from_json(const nlohmann::json& doc) {
  require(doc.value("format", "") == "ihtp-surrogates", ErrorKind::Io, "not a surrogate file");
  SurrogatePair p;
  p.manifest_hash = doc.at("manifest_hash").get<std::string>();
  p.sensor = CellIndex{doc.at("sensor").at(0).get<int>(), doc.at("sensor").at(1).get<int>()};
  p.transfer = MlpModel::from_json(doc.at("transfer"));
  p.sensitivity = MlpModel::from_json(doc.at("sensitivity"));
  p.transfer_report = report_from_json(doc.at("transfer_report"));
  p.sensitivity_report = report_from_json(doc.at("sensitivity_report"));
  for (const auto& c : doc.value("candidates", nlohmann::json::array()))
    p.candidates.push_back({c.at("seed").get<std::uint64_t>(),
                            c.at("AE").is_number() ? c.at("AE").get<double>()
                                                   : std::numeric_limits<double>::infinity()});
  p.training_seconds = doc.value("training_seconds", 0.0);
  return p;
}

SurrogatePair train_surrogates(const SignalManifest& manifest, const Mesh& mesh, const PhysicalParams& params,
                               CellIndex sensor, const SurrogateConfig& config) {
  LocalStencil{sensor}.validate(mesh);
  require(config.selection.candidates >= 1, ErrorKind::InvalidArgument, "need at least one transfer candidate");
  const auto start = std::chrono::steady_clock::now();
  const RenderedSignal rendered = render_manifest(manifest, mesh.dt);
  const SurrogateDatasets data = generate_datasets(rendered.signal, mesh, params, sensor, config.perturbation);
  const std::string hash = io::json_hash(dataset_manifest(manifest, mesh, params, sensor, config.perturbation));

  SurrogatePair pair;
  pair.sensor = sensor;
  pair.manifest_hash = hash;
  TrainResult s = fit_network(data.sensitivity, config.sensitivity);
  pair.sensitivity = std::move(s.model);
  pair.sensitivity.manifest_hash = hash;
  pair.sensitivity.metadata["role"] = "sensitivity";
  pair.sensitivity_report = s.report;

  std::optional<MeasurementStream> stream;
  InversionConfig probe;
  probe.noise = config.selection.noise;
  probe.nf = config.selection.nf;
  probe.seed = config.selection.seed;
  std::optional<TrainResult> best;
  double best_ae = std::numeric_limits<double>::infinity();
  for (int c = 0; c < config.selection.candidates; ++c) {
    FitOptions options = config.transfer;
    options.train.seed = config.transfer.train.seed + static_cast<std::uint64_t>(c);
    TrainResult t = fit_network(data.transfer, options);
    t.model.manifest_hash = hash;
    double ae = std::numeric_limits<double>::infinity();
    if (config.selection.candidates > 1) {
      if (!stream) stream = make_measurements(rendered.signal, mesh, params, sensor, probe.noise, probe.seed);
      try {
        ae = run_ann_eks(ReducedAnnModel(t.model, pair.sensitivity, {}, hash), *stream, params, probe).ae;
      } catch (const Error&) {
        // A candidate whose closed loop blows up simply loses.
      }
      if (!std::isfinite(ae)) ae = std::numeric_limits<double>::infinity();
    }
    pair.candidates.push_back({options.train.seed, ae});
    if (!best || ae < best_ae) {
      best = std::move(t);
      best_ae = ae;
    }
  }
  pair.transfer = std::move(best->model);
  pair.transfer.metadata["role"] = "transfer";
  pair.transfer_report = best->report;
  pair.training_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return pair;
}

std::string surrogate_key(const SignalManifest& manifest, const Mesh& mesh, const PhysicalParams& params,
                          CellIndex sensor, const SurrogateConfig& config) {
  return io::json_hash({{"dataset", dataset_manifest(manifest, mesh, params, sensor, config.perturbation)},
                    {"config", config.to_json()},
                    {"version", IHTP_VERSION}});
}

std::filesystem::path surrogate_path(const std::filesystem::path& cache_dir, const SignalManifest& manifest,
                                     const Mesh& mesh, const PhysicalParams& params, CellIndex sensor,
                                     const SurrogateConfig& config) {
  return cache_dir / ("surrogates-" + surrogate_key(manifest, mesh, params, sensor, config) + ".json");
}

SurrogatePair load_or_train_surrogates(const std::filesystem::path& cache_dir, const SignalManifest& manifest,
                                       const Mesh& mesh, const PhysicalParams& params, CellIndex sensor,
                                       const SurrogateConfig& config, bool train_missing) {
  if (cache_dir.empty()) return train_surrogates(manifest, mesh, params, sensor, config);
  const auto path = surrogate_path(cache_dir, manifest, mesh, params, sensor, config);
  if (std::filesystem::exists(path)) return SurrogatePair::from_json(io::read_json(path));
  require(train_missing, ErrorKind::Io, "missing model file " + path.string() + " (run `ihtp train` first)");
  SurrogatePair pair = train_surrogates(manifest, mesh, params, sensor, config);
  std::filesystem::create_directories(cache_dir);
  io::write_json(path, pair.to_json());
  return pair;
}

std::filesystem::path cache_directory(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("IHTP_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  return fallback;
}

}  // namespace ihtp
