#include "ihtp/inversion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include <time.h>

#include "ihtp/error.hpp"
#include "ihtp/io.hpp"

namespace ihtp {

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::AnnEks: return "ann_eks";
    case Algorithm::CfdEks: return "cfd_eks";
    case Algorithm::InverseAnn: return "inverse_ann";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "ann_eks") return Algorithm::AnnEks;
  if (name == "cfd_eks") return Algorithm::CfdEks;
  if (name == "inverse_ann") return Algorithm::InverseAnn;
  fail(ErrorKind::InvalidArgument, "unknown algorithm '" + name + "' (expected ann_eks, cfd_eks or inverse_ann)");
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view consumer) {
  const std::string hex = io::fnv1a_hex(std::to_string(root) + ":" + std::string(consumer));
  return std::stoull(hex, nullptr, 16);
}

std::vector<double> add_noise(std::span<const double> series, double m, std::uint64_t seed) {
  require(m >= 0.0 && std::isfinite(m), ErrorKind::InvalidArgument, "add_noise: noise level must be >= 0");
  std::vector<double> out(series.begin(), series.end());
  if (m == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out) v += m * normal(rng);
  return out;
}

double average_error(std::span<const double> q_true, std::span<const double> q_est) {
  require(q_true.size() == q_est.size(), ErrorKind::InvalidArgument, "average_error: length mismatch");
  require(!q_true.empty(), ErrorKind::InvalidArgument, "average_error: empty window");
  double scale = 0.0;
  for (double q : q_true) scale = std::max(scale, std::abs(q));
  require(scale > 0.0, ErrorKind::InvalidArgument, "average_error: true flux is identically zero");
  double sum = 0.0;
  for (std::size_t k = 0; k < q_true.size(); ++k) {
    const double d = (q_true[k] - q_est[k]) / scale;
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(q_true.size()));
}

nlohmann::json FilterTuning::to_json() const {
  return {{"temperature_process_variance", temperature_process_variance},
          {"flux_process_variance", flux_process_variance},
          {"prior_temperature_variance", prior_temperature_variance},
          {"prior_flux_variance", prior_flux_variance},
          {"min_measurement_variance", min_measurement_variance},
          {"rts_form", form == RtsForm::Standard ? "standard" : "filtered_difference"}};
}

void InversionConfig::validate() const {
  require(noise >= 0.0 && std::isfinite(noise), ErrorKind::InvalidArgument, "noise level must be >= 0");
  require(inverse_training_noise >= 0.0, ErrorKind::InvalidArgument, "inverse training noise must be >= 0");
  require(filter.temperature_process_variance >= 0.0 && filter.flux_process_variance >= 0.0 &&
              filter.prior_temperature_variance > 0.0 && filter.prior_flux_variance > 0.0 &&
              filter.min_measurement_variance > 0.0,
          ErrorKind::InvalidArgument, "filter variances must be positive");
}

nlohmann::json InversionConfig::to_json() const {
  return {{"algorithm", to_string(algorithm)},
          {"sensor", {sensor_x, sensor_y}},
          {"nf", nf},
          {"noise", noise},
          {"seed", seed},
          {"horizon", horizon},
          {"filter", filter.to_json()},
          {"inverse_np", past_window()},
          {"inverse_training_noise", inverse_training_noise}};
}

MeasurementStream make_measurements(const FluxSignal& truth, const Mesh& mesh, const PhysicalParams& params,
                                    CellIndex sensor, double noise, std::uint64_t seed) {
  require(std::abs(truth.dt - mesh.dt) <= 1e-12 * mesh.dt, ErrorKind::InvalidArgument,
          "signal dt does not match the mesh time step");
  MeasurementStream s;
  s.truth = truth;
  s.sensor = sensor;
  const CellIndex probes[] = {sensor};
  const TransientResult run = run_transient(truth.samples, mesh, params, probes);
  s.clean.reserve(truth.samples.size() + 1);
  s.clean.push_back(params.inlet_temperature);
  s.clean.insert(s.clean.end(), run.probes[0].begin(), run.probes[0].end());
  s.noisy = add_noise(s.clean, noise, derive_seed(seed, "noise"));
  return s;
}

nlohmann::json InversionResult::summary() const {
  return {{"algorithm", to_string(algorithm)},
          {"AE", ae},
          {"mean_step_ms", mean_step_ms},
          {"p95_step_ms", p95_step_ms},
          {"cpu_step_ms", cpu_step_ms},
          {"steps", steps.size()},
          {"measurements", total_steps},
          {"warmup_shortfall", warmup_shortfall},
          {"covariance",
           {{"checks", covariance.checks},
            {"failures", covariance.failures},
            {"repairs", covariance.repairs},
            {"regularized_solves", covariance.regularized_solves},
            {"max_asymmetry", covariance.max_asymmetry}}}};
}

void InversionResult::write_csv(const std::filesystem::path& path, double dt) const {
  const std::vector<std::string> header{"k", "t", "q_true", "q_hat", "T_meas"};
  io::CsvWriter out(path, header);
  for (std::size_t r = 0; r < steps.size(); ++r) {
    const double row[] = {static_cast<double>(steps[r]), static_cast<double>(steps[r]) * dt, q_true[r], q_hat[r],
                          measured[r]};
    out.row(std::span<const double>(row));
  }
  out.close();
}

GaussianState reduced_prior(const PhysicalParams& params, const FilterTuning& tuning) {
  GaussianState prior;
  prior.mean = Eigen::VectorXd::Constant(kReducedDim, params.inlet_temperature);
  prior.mean[kFlux] = 0.0;
  prior.cov = Eigen::MatrixXd::Zero(kReducedDim, kReducedDim);
  prior.cov.diagonal().setConstant(tuning.prior_temperature_variance);
  prior.cov(kFlux, kFlux) = tuning.prior_flux_variance;
  return prior;
}

NoiseModel filter_noise(Eigen::Index dim, const FilterTuning& tuning, double m) {
  return NoiseModel::diagonal(dim, tuning.temperature_process_variance, tuning.flux_process_variance,
                              std::max(m * m, tuning.min_measurement_variance));
}

namespace {

using Clock = std::chrono::steady_clock;

void finish_timing(InversionResult& r, std::vector<double>& ms) {
  if (ms.empty()) return;
  double sum = 0.0;
  for (double v : ms) sum += v;
  r.mean_step_ms = sum / static_cast<double>(ms.size());
  const std::size_t idx = std::min(ms.size() - 1, static_cast<std::size_t>(std::ceil(0.95 * ms.size())) - 1);
  std::nth_element(ms.begin(), ms.begin() + static_cast<std::ptrdiff_t>(idx), ms.end());
  r.p95_step_ms = ms[idx];
}

std::size_t usable_measurements(const MeasurementStream& stream, std::size_t horizon) {
  // One measurement per estimated step plus the final one.
  const std::size_t n = stream.noisy.size();
  return horizon == 0 ? n : std::min(n, horizon + 1);
}

double thread_cpu_ms() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) * 1e3 + static_cast<double>(ts.tv_nsec) * 1e-6;
}

void finish_error(InversionResult& r) {
  if (!r.q_true.empty()) r.ae = average_error(r.q_true, r.q_hat);
}

template <class Model>
InversionResult run_filter(const Model& model, GaussianState prior, const MeasurementStream& stream,
                           const InversionConfig& config, Algorithm algorithm) {
  config.validate();
  const std::size_t n = usable_measurements(stream, config.horizon);
  const std::size_t flux_steps = std::min(n, stream.truth.samples.size());
  SmootherOptions opts;
  opts.lag = config.nf;
  opts.form = config.filter.form;
  opts.smooth_covariance = algorithm != Algorithm::CfdEks;
  FixedLagSmoother<Model> smoother(model, filter_noise(model.dimension(), config.filter, config.noise),
                                   std::move(prior), opts);
  InversionResult r;
  r.algorithm = algorithm;
  std::vector<double> ms;
  ms.reserve(n);
  const double cpu0 = thread_cpu_ms();
  for (std::size_t k = 0; k < n; ++k) {
    const auto t0 = Clock::now();
    auto emission = smoother.push(stream.noisy[k]);
    ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    if (emission && emission->step < flux_steps) {
      r.steps.push_back(emission->step);
      r.q_true.push_back(stream.truth.samples[emission->step]);
      r.q_hat.push_back(emission->flux());
      r.measured.push_back(stream.noisy[emission->step]);
    }
  }
  r.total_steps = n;
  r.warmup_shortfall = smoother.warmup_shortfall();
  r.covariance = smoother.diagnostics();
  if (n > 0) r.cpu_step_ms = (thread_cpu_ms() - cpu0) / static_cast<double>(n);
  finish_timing(r, ms);
  finish_error(r);
  return r;
}

}  // namespace

InversionResult run_ann_eks(const ReducedAnnModel& model, const MeasurementStream& stream,
                            const PhysicalParams& params, const InversionConfig& config) {
  return run_filter(model, reduced_prior(params, config.filter), stream, config, Algorithm::AnnEks);
}

InversionResult run_cfd_eks(const CfdTransferModel& model, const MeasurementStream& stream,
                            const PhysicalParams& params, const InversionConfig& config) {
  require(model.sensor().i == stream.sensor.i && model.sensor().j == stream.sensor.j,
          ErrorKind::ManifestMismatch, "run_cfd_eks: model sensor differs from the measurement sensor");
  GaussianState prior;
  prior.mean = model.initial_state(0.0);
  prior.cov = Eigen::MatrixXd::Zero(model.dimension(), model.dimension());
  prior.cov.diagonal().setConstant(config.filter.prior_temperature_variance);
  prior.cov(model.dimension() - 1, model.dimension() - 1) = config.filter.prior_flux_variance;
  (void)params;
  return run_filter(model, std::move(prior), stream, config, Algorithm::CfdEks);
}

namespace {

// Row r holds z_{r}..z_{r+np+nf}, target q_{r+np}.
void window_rows(std::span<const double> z, std::span<const double> q, std::size_t np, std::size_t nf,
                 Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
  const std::size_t width = np + nf + 1;
  const std::size_t count = q.size() >= np + 1 && z.size() >= width ? std::min(q.size() - np, z.size() - width + 1) : 0;
  x.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(width));
  y.resize(static_cast<Eigen::Index>(count), 1);
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t c = 0; c < width; ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = z[r + c];
    y(static_cast<Eigen::Index>(r), 0) = q[r + np];
  }
}

std::vector<std::string> window_names(std::size_t np, std::size_t nf) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < np + nf + 1; ++c) {
    const long offset = static_cast<long>(c) - static_cast<long>(np);
    names.push_back("z" + std::string(offset < 0 ? "m" : "p") + std::to_string(std::abs(offset)));
  }
  return names;
}

}  // namespace

MlpModel train_inverse_ann(const FluxSignal& corpus, const Mesh& mesh, const PhysicalParams& params,
                           CellIndex sensor, std::size_t np, std::size_t nf, double training_noise,
                           std::uint64_t seed, const FitOptions& fit) {
  const MeasurementStream s = make_measurements(corpus, mesh, params, sensor, training_noise, seed);
  Dataset data;
  window_rows(s.noisy, corpus.samples, np, nf, data.inputs, data.outputs);
  require(data.rows() >= 3, ErrorKind::InvalidArgument, "train_inverse_ann: corpus shorter than the window");
  data.input_names = window_names(np, nf);
  data.output_names = {"q"};
  data.tags.assign(static_cast<std::size_t>(data.rows()), SampleTag::Transfer);
  TrainResult result = fit_network(data, fit);
  result.model.metadata["role"] = "inverse";
  result.model.metadata["np"] = np;
  result.model.metadata["nf"] = nf;
  result.model.metadata["sensor"] = {sensor.i, sensor.j};
  result.model.metadata["training_noise"] = training_noise;
  return std::move(result.model);
}

InversionResult run_inverse_ann(const MlpModel& model, const MeasurementStream& stream,
                                const InversionConfig& config) {
  config.validate();
  const auto np = model.metadata.at("np").get<std::size_t>();
  const auto nf = model.metadata.at("nf").get<std::size_t>();
  const auto& s = model.metadata.at("sensor");
  require(s.at(0).get<int>() == stream.sensor.i && s.at(1).get<int>() == stream.sensor.j,
          ErrorKind::ManifestMismatch, "run_inverse_ann: model was trained for a different sensor");
  const std::size_t n = usable_measurements(stream, config.horizon);
  const std::size_t flux_steps = std::min(n, stream.truth.samples.size());
  InversionResult r;
  r.algorithm = Algorithm::InverseAnn;
  r.total_steps = n;
  std::vector<double> ms;
  Eigen::VectorXd window(static_cast<Eigen::Index>(np + nf + 1));
  for (std::size_t k = np; k < flux_steps && k + nf < n; ++k) {
    const auto t0 = Clock::now();
    for (std::size_t c = 0; c < np + nf + 1; ++c) window[static_cast<Eigen::Index>(c)] = stream.noisy[k - np + c];
    const double q = model.predict(window)[0];
    ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    r.steps.push_back(k);
    r.q_true.push_back(stream.truth.samples[k]);
    r.q_hat.push_back(q);
    r.measured.push_back(stream.noisy[k]);
  }
  r.warmup_shortfall = np;
  finish_timing(r, ms);
  finish_error(r);
  return r;
}

nlohmann::json Scenario::to_json() const {
  return {{"mesh", {{"nx", mesh.nx}, {"ny", mesh.ny}, {"dx", mesh.dx}, {"dy", mesh.dy}, {"dt", mesh.dt}}},
          {"training_hash", training.hash()},
          {"testing_hash", testing.hash()},
          {"surrogates", surrogates.to_json()},
          {"inverse_fit", inverse_fit.to_json()}};
}

MlpModel load_or_train_inverse_ann(const Scenario& scenario, CellIndex sensor, const InversionConfig& config) {
  const FluxSignal corpus = render_manifest(scenario.training, scenario.mesh.dt).signal;
  const std::uint64_t seed = derive_seed(config.seed, "inverse-training");
  auto train = [&] {
    return train_inverse_ann(corpus, scenario.mesh, scenario.params, sensor, config.past_window(), config.nf,
                             config.inverse_training_noise, seed, scenario.inverse_fit);
  };
  if (scenario.cache_dir.empty()) return train();
  const nlohmann::json key_doc = {{"scenario", scenario.to_json()},
                                  {"sensor", {sensor.i, sensor.j}},
                                  {"np", config.past_window()},
                                  {"nf", config.nf},
                                  // Clean training does not depend on the seed.
                                  {"noise", config.inverse_training_noise},
                                  {"seed", config.inverse_training_noise > 0.0 ? seed : 0},
                                  {"version", IHTP_VERSION}};
  const auto path = scenario.cache_dir / ("inverse-" + io::json_hash(key_doc) + ".json");
  if (std::filesystem::exists(path)) return MlpModel::load(path);
  require(scenario.train_missing, ErrorKind::Io, "missing model file " + path.string() + " (run `ihtp train` first)");
  MlpModel model = train();
  std::filesystem::create_directories(scenario.cache_dir);
  model.save(path);
  return model;
}

SurrogatePair load_or_train_surrogates(const Scenario& scenario, CellIndex sensor) {
  return load_or_train_surrogates(scenario.cache_dir, scenario.training, scenario.mesh, scenario.params, sensor,
                                  scenario.surrogates, scenario.train_missing);
}

InversionResult run_inversion(const InversionConfig& config, const Scenario& scenario) {
  config.validate();
  const CellIndex sensor = node_index(config.sensor_x, config.sensor_y, scenario.mesh, scenario.params);
  const FluxSignal truth = render_manifest(scenario.testing, scenario.mesh.dt).signal;
  const MeasurementStream stream = make_measurements(truth, scenario.mesh, scenario.params, sensor, config.noise,
                                                     config.seed);
  switch (config.algorithm) {
    case Algorithm::AnnEks: {
      const SurrogatePair pair = load_or_train_surrogates(scenario, sensor);
      return run_ann_eks(pair.reduced_model(), stream, scenario.params, config);
    }
    case Algorithm::CfdEks: {
      InversionConfig c = config;
      if (c.horizon == 0) c.horizon = 200;
      const CfdTransferModel model(scenario.mesh, scenario.params, sensor);
      return run_cfd_eks(model, stream, scenario.params, c);
    }
    case Algorithm::InverseAnn:
      return run_inverse_ann(load_or_train_inverse_ann(scenario, sensor, config), stream, config);
  }
  fail(ErrorKind::Internal, "run_inversion: unhandled algorithm");
}

}  // namespace ihtp
