#include "ihtp/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "ihtp/error.hpp"
#include "ihtp/io.hpp"

namespace ihtp {

ResultStore::ResultStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::optional<nlohmann::json> ResultStore::find(const std::string& key) const {
  std::lock_guard lock(mutex_);
  if (auto it = memory_.find(key); it != memory_.end()) return std::optional<nlohmann::json>(std::in_place, it->second);
  if (dir_.empty()) return std::nullopt;
  const auto path = dir_ / ("cell-" + key + ".json");
  if (!std::filesystem::exists(path)) return std::nullopt;
  return std::optional<nlohmann::json>(std::in_place, io::read_json(path));
}

void ResultStore::put(const std::string& key, const nlohmann::json& value) {
  std::lock_guard lock(mutex_);
  memory_[key] = value;
  if (!dir_.empty()) io::write_json(dir_ / ("cell-" + key + ".json"), value);
}

void parallel_for(std::size_t jobs, std::size_t count, const std::function<void(std::size_t)>& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first) first = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

double median(std::vector<double> values) {
  require(!values.empty(), ErrorKind::InvalidArgument, "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorKind::InvalidArgument, "fit_line: need two or more points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, ErrorKind::InvalidArgument, "fit_line: x values are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

std::map<std::string, double> family_errors(const InversionResult& result,
                                            std::span<const RenderedSignal::Section> sections) {
  std::map<std::string, std::vector<double>> truth, estimate;
  for (std::size_t r = 0; r < result.steps.size(); ++r) {
    const std::size_t k = result.steps[r];
    for (const auto& s : sections) {
      if (k >= s.begin && k < s.end) {
        truth[s.family].push_back(result.q_true[r]);
        estimate[s.family].push_back(result.q_hat[r]);
        break;
      }
    }
  }
  std::map<std::string, double> out;
  for (const auto& [family, q] : truth) out[family] = average_error(q, estimate[family]);
  return out;
}

void SweepSpec::validate() const {
  require(!seeds.empty(), ErrorKind::InvalidArgument, "sweep needs at least one replicate seed");
  require(jobs >= 1, ErrorKind::InvalidArgument, "sweep jobs must be >= 1");
  require(sensor_stride >= 1, ErrorKind::InvalidArgument, "sensor stride must be >= 1");
  require(timing_repeats >= 1, ErrorKind::InvalidArgument, "timing repeats must be >= 1");
  for (double m : noise_levels) require(m >= 0.0, ErrorKind::InvalidArgument, "noise levels must be >= 0");
  const std::set<std::string> known{"sin", "para", "step", "tri"};
  for (const auto& set : exclusions)
    for (const auto& f : set)
      require(known.count(f) > 0, ErrorKind::InvalidArgument, "unknown training family '" + f + "'");
  base.validate();
}

nlohmann::json SweepSpec::to_json() const {
  nlohmann::json sensor_list = nlohmann::json::array();
  for (const auto& [x, y] : sensors) sensor_list.push_back({x, y});
  return {{"base", base.to_json()},
          {"seeds", seeds},
          {"exclusions", exclusions},
          {"sensor_stride", sensor_stride},
          {"nf_values", nf_values},
          {"sensors", sensor_list},
          {"timing_repeats", timing_repeats},
          {"noise_levels", noise_levels},
          {"include_cfd", include_cfd},
          {"cfd_horizon", cfd_horizon}};
}

nlohmann::json Replicate::to_json() const {
  nlohmann::json m = nlohmann::json::object();
  for (const auto& [k, v] : metrics) m[k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  return {{"labels", labels},
          {"seed", seed},
          {"AE", std::isfinite(ae) ? nlohmann::json(ae) : nlohmann::json(nullptr)},
          {"mean_step_ms", mean_step_ms},
          {"p95_step_ms", p95_step_ms},
          {"divergent", divergent},
          {"metrics", m},
          {"key", key},
          {"error", error}};
}

Replicate Replicate::from_json(const nlohmann::json& doc) {
  Replicate r;
  r.labels = doc.at("labels").get<std::map<std::string, std::string>>();
  r.seed = doc.at("seed").get<std::uint64_t>();
  r.ae = doc.at("AE").is_number() ? doc.at("AE").get<double>() : std::nan("");
  r.mean_step_ms = doc.at("mean_step_ms").get<double>();
  r.p95_step_ms = doc.at("p95_step_ms").get<double>();
  r.divergent = doc.at("divergent").get<bool>();
  for (const auto& [k, v] : doc.at("metrics").items()) r.metrics[k] = v.is_number() ? v.get<double>() : std::nan("");
  r.key = doc.at("key").get<std::string>();
  r.error = doc.at("error").get<std::string>();
  return r;
}

void write_replicates_csv(const std::filesystem::path& path, std::span<const Replicate> rows) {
  std::set<std::string> label_set, metric_set;
  for (const auto& r : rows) {
    for (const auto& [k, v] : r.labels) label_set.insert(k);
    for (const auto& [k, v] : r.metrics) metric_set.insert(k);
  }
  std::vector<std::string> header(label_set.begin(), label_set.end());
  for (const char* c : {"seed", "AE", "mean_step_ms", "p95_step_ms", "divergent"}) header.emplace_back(c);
  header.insert(header.end(), metric_set.begin(), metric_set.end());
  header.emplace_back("key");
  header.emplace_back("error");
  io::CsvWriter out(path, header);
  for (const auto& r : rows) {
    std::vector<std::string> cells;
    for (const auto& l : label_set) {
      auto it = r.labels.find(l);
      cells.push_back(it == r.labels.end() ? "" : it->second);
    }
    cells.push_back(std::to_string(r.seed));
    cells.push_back(io::format_double(r.ae));
    cells.push_back(io::format_double(r.mean_step_ms));
    cells.push_back(io::format_double(r.p95_step_ms));
    cells.push_back(r.divergent ? "1" : "0");
    for (const auto& m : metric_set) {
      auto it = r.metrics.find(m);
      cells.push_back(it == r.metrics.end() ? "" : io::format_double(it->second));
    }
    cells.push_back(r.key);
    cells.push_back(r.error);
    out.row(std::span<const std::string>(cells));
  }
  out.close();
}

namespace {

bool is_divergent(double ae) { return !std::isfinite(ae) || ae > kDivergenceThreshold; }

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

// Runs `compute` unless the store already holds the cell. A thrown Error is
// recorded as a divergent replicate rather than aborting the sweep.
Replicate cached(ResultStore& store, const nlohmann::json& key_doc, std::map<std::string, std::string> labels,
                 std::uint64_t seed, const std::function<Replicate()>& compute) {
  const std::string key = io::json_hash(key_doc);
  if (auto hit = store.find(key)) return Replicate::from_json(*hit);
  Replicate r;
  try {
    r = compute();
  } catch (const Error& e) {
    r.ae = std::nan("");
    r.error = std::string(to_string(e.kind())) + ": " + e.what();
  }
  r.labels = std::move(labels);
  r.seed = seed;
  r.key = key;
  r.divergent = is_divergent(r.ae);
  nlohmann::json doc = r.to_json();
  doc["config"] = key_doc;
  store.put(key, doc);
  return r;
}

Replicate from_result(const InversionResult& result) {
  Replicate r;
  r.ae = result.ae;
  r.mean_step_ms = result.mean_step_ms;
  r.p95_step_ms = result.p95_step_ms;
  r.metrics["cov_checks"] = static_cast<double>(result.covariance.checks);
  r.metrics["cov_failures"] = static_cast<double>(result.covariance.failures);
  r.metrics["cov_max_asymmetry"] = result.covariance.max_asymmetry;
  return r;
}

Scenario with_training(const Scenario& scenario, const std::vector<std::string>& excluded) {
  Scenario s = scenario;
  s.training = scenario.training.without({excluded.begin(), excluded.end()});
  return s;
}

nlohmann::json cell_key(const char* kind, const Scenario& scenario, const InversionConfig& config) {
  return {{"kind", kind}, {"scenario", scenario.to_json()}, {"config", config.to_json()}, {"version", IHTP_VERSION}};
}

double median_ae(const std::vector<Replicate>& reps) {
  std::vector<double> v;
  for (const auto& r : reps) v.push_back(std::isfinite(r.ae) ? r.ae : std::numeric_limits<double>::infinity());
  return median(std::move(v));
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json replicates_json(const std::vector<Replicate>& reps) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : reps) out.push_back(r.to_json());
  return out;
}

}  // namespace

std::vector<std::vector<std::string>> standard_exclusions() {
  return {{},
          {"sin"},
          {"para"},
          {"step"},
          {"tri"},
          {"sin", "para"},
          {"step", "para"},
          {"tri", "para"},
          {"sin", "tri"},
          {"sin", "step"},
          {"step", "tri"},
          {"sin", "para", "tri"},
          {"sin", "para", "step"},
          {"sin", "tri", "step"},
          {"para", "tri", "step"}};
}

nlohmann::json AblationResult::to_json() const {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json families = nlohmann::json::object();
    for (const auto& [f, ae] : row.family_ae) families[f] = number_or_null(ae);
    table.push_back({{"id", row.id},
                     {"excluded", row.excluded},
                     {"family_ae", families},
                     {"overall_ae", number_or_null(row.overall_ae)},
                     {"divergent", row.divergent},
                     {"training_manifest_hash", row.manifest_hash}});
  }
  return {{"kind", "ablation"}, {"rows", table}, {"replicates", replicates_json(replicates)}};
}

AblationResult ablation_study(const Scenario& scenario, const SweepSpec& spec, ResultStore& store) {
  spec.validate();
  const auto exclusions = spec.exclusions.empty() ? standard_exclusions() : spec.exclusions;
  const CellIndex sensor = node_index(spec.base.sensor_x, spec.base.sensor_y, scenario.mesh, scenario.params);
  const RenderedSignal testing = render_manifest(scenario.testing, scenario.mesh.dt);

  std::vector<std::vector<Replicate>> reps(exclusions.size());
  parallel_for(spec.jobs, exclusions.size(), [&](std::size_t row) {
    const Scenario s = with_training(scenario, exclusions[row]);
    std::optional<ReducedAnnModel> model;
    for (std::uint64_t seed : spec.seeds) {
      InversionConfig c = spec.base;
      c.algorithm = Algorithm::AnnEks;
      c.seed = seed;
      reps[row].push_back(cached(
          store, cell_key("ablation", s, c), {{"dataset", std::to_string(row)}, {"excluded", join(exclusions[row], "+")}},
          seed, [&] {
            if (!model) {
              model = load_or_train_surrogates(s, sensor).reduced_model();
            }
            const auto stream = make_measurements(testing.signal, s.mesh, s.params, sensor, c.noise, c.seed);
            const auto result = run_ann_eks(*model, stream, s.params, c);
            Replicate out = from_result(result);
            for (const auto& [f, ae] : family_errors(result, testing.sections)) out.metrics["ae_" + f] = ae;
            return out;
          }));
    }
  });

  AblationResult out;
  for (std::size_t row = 0; row < exclusions.size(); ++row) {
    AblationRow ar;
    ar.id = row;
    ar.excluded = exclusions[row];
    ar.manifest_hash = scenario.training.without({exclusions[row].begin(), exclusions[row].end()}).hash();
    for (const auto& section : testing.sections) {
      std::vector<double> v;
      for (const auto& r : reps[row]) {
        auto it = r.metrics.find("ae_" + section.family);
        v.push_back(it != r.metrics.end() && std::isfinite(it->second) ? it->second
                                                                       : std::numeric_limits<double>::infinity());
      }
      ar.family_ae[section.family] = median(std::move(v));
    }
    ar.overall_ae = median_ae(reps[row]);
    ar.divergent = is_divergent(ar.overall_ae);
    for (const auto& [f, ae] : ar.family_ae) ar.divergent = ar.divergent || is_divergent(ae);
    out.rows.push_back(std::move(ar));
    out.replicates.insert(out.replicates.end(), reps[row].begin(), reps[row].end());
  }
  return out;
}

std::vector<CellIndex> sweep_cells(const Mesh& mesh, int stride) {
  require(stride >= 1, ErrorKind::InvalidArgument, "sweep_cells: stride must be >= 1");
  std::vector<CellIndex> cells;
  for (int i = 1; i + 1 < mesh.nx; i += stride)
    for (int j = 1; j + 1 < mesh.ny; j += stride) cells.push_back({i, j});
  return cells;
}

nlohmann::json SensorSweepResult::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : cells)
    list.push_back({{"i", c.cell.i}, {"j", c.cell.j}, {"x", c.x}, {"y", c.y}, {"AE", number_or_null(c.ae)},
                    {"divergent", c.divergent}});
  return {{"kind", "sensors"}, {"cells", list}, {"replicates", replicates_json(replicates)}};
}

void SensorSweepResult::write_heatmap_csv(const std::filesystem::path& path, const Mesh& mesh) const {
  std::vector<std::vector<std::string>> grid(static_cast<std::size_t>(mesh.ny),
                                             std::vector<std::string>(static_cast<std::size_t>(mesh.nx)));
  for (const auto& c : cells)
    grid[static_cast<std::size_t>(c.cell.j)][static_cast<std::size_t>(c.cell.i)] =
        std::isfinite(c.ae) ? io::format_double(c.ae) : "inf";
  std::vector<std::string> header{"y"};
  for (int i = 0; i < mesh.nx; ++i) header.push_back(io::format_double(mesh.x_center(i)));
  io::CsvWriter out(path, header);
  for (int j = 0; j < mesh.ny; ++j) {
    std::vector<std::string> row{io::format_double(mesh.y_center(j))};
    row.insert(row.end(), grid[static_cast<std::size_t>(j)].begin(), grid[static_cast<std::size_t>(j)].end());
    out.row(std::span<const std::string>(row));
  }
  out.close();
}

SensorSweepResult sensor_location_sweep(const Scenario& scenario, const SweepSpec& spec, ResultStore& store) {
  spec.validate();
  const auto cells = sweep_cells(scenario.mesh, spec.sensor_stride);
  const FluxSignal truth = render_manifest(scenario.testing, scenario.mesh.dt).signal;
  std::vector<std::vector<Replicate>> reps(cells.size());
  parallel_for(spec.jobs, cells.size(), [&](std::size_t n) {
    const CellIndex cell = cells[n];
    InversionConfig c = spec.base;
    c.algorithm = Algorithm::AnnEks;
    c.sensor_x = scenario.mesh.x_center(cell.i);
    c.sensor_y = scenario.mesh.y_center(cell.j);
    std::optional<ReducedAnnModel> model;
    for (std::uint64_t seed : spec.seeds) {
      c.seed = seed;
      reps[n].push_back(cached(store, cell_key("sensors", scenario, c),
                               {{"i", std::to_string(cell.i)}, {"j", std::to_string(cell.j)}}, seed, [&] {
                                 if (!model) {
                                   model = load_or_train_surrogates(scenario, cell).reduced_model();
                                 }
                                 const auto stream = make_measurements(truth, scenario.mesh, scenario.params, cell,
                                                                       c.noise, c.seed);
                                 return from_result(run_ann_eks(*model, stream, scenario.params, c));
                               }));
    }
  });
  SensorSweepResult out;
  for (std::size_t n = 0; n < cells.size(); ++n) {
    SensorCell sc;
    sc.cell = cells[n];
    sc.x = scenario.mesh.x_center(sc.cell.i);
    sc.y = scenario.mesh.y_center(sc.cell.j);
    sc.ae = median_ae(reps[n]);
    sc.divergent = is_divergent(sc.ae);
    out.cells.push_back(sc);
    out.replicates.insert(out.replicates.end(), reps[n].begin(), reps[n].end());
  }
  return out;
}

std::vector<std::pair<double, double>> default_nf_sensors() {
  return {{0.820, 0.091}, {0.820, 0.087}, {0.500, 0.091}, {0.820, 0.095}};
}

nlohmann::json NfSweepResult::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& p : points)
    list.push_back({{"sensor", {p.x, p.y}}, {"nf", p.nf}, {"AE", number_or_null(p.ae)}, {"cpu_step_ms", p.cpu_step_ms}});
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : timing_fits) fits.push_back({{"intercept_ms", f.intercept}, {"slope_ms", f.slope}, {"r2", f.r2}});
  return {{"kind", "nf"}, {"points", list}, {"timing_fits", fits}, {"replicates", replicates_json(replicates)}};
}

NfSweepResult future_step_sweep(const Scenario& scenario, const SweepSpec& spec, ResultStore& store) {
  spec.validate();
  std::vector<std::size_t> nf_values = spec.nf_values;
  if (nf_values.empty())
    for (std::size_t nf = 0; nf <= 30; ++nf) nf_values.push_back(nf);
  const auto sensors = spec.sensors.empty() ? default_nf_sensors() : spec.sensors;
  require(nf_values.size() >= 2, ErrorKind::InvalidArgument, "future_step_sweep: need two or more nf values");
  const FluxSignal truth = render_manifest(scenario.testing, scenario.mesh.dt).signal;

  std::vector<CellIndex> cells;
  std::vector<std::optional<ReducedAnnModel>> models(sensors.size());
  std::vector<std::once_flag> loaded(sensors.size());
  for (const auto& [x, y] : sensors) cells.push_back(node_index(x, y, scenario.mesh, scenario.params));
  auto model_for = [&](std::size_t s) -> const ReducedAnnModel& {
    std::call_once(loaded[s], [&] {
      models[s] = load_or_train_surrogates(scenario, cells[s]).reduced_model();
    });
    return *models[s];
  };
  auto config_for = [&](std::size_t s, std::size_t nf, std::uint64_t seed) {
    InversionConfig c = spec.base;
    c.algorithm = Algorithm::AnnEks;
    c.sensor_x = sensors[s].first;
    c.sensor_y = sensors[s].second;
    c.nf = nf;
    c.seed = seed;
    return c;
  };
  auto labels_for = [&](std::size_t s, std::size_t nf) {
    return std::map<std::string, std::string>{{"sensor_x", io::format_double(sensors[s].first)},
                                              {"sensor_y", io::format_double(sensors[s].second)},
                                              {"nf", std::to_string(nf)}};
  };

  // Accuracy cells run in the pool; timing is measured afterwards on one thread.
  const std::size_t per_sensor = nf_values.size() * spec.seeds.size();
  std::vector<Replicate> reps(sensors.size() * per_sensor);
  parallel_for(spec.jobs, reps.size(), [&](std::size_t n) {
    const std::size_t s = n / per_sensor;
    const std::size_t nf = nf_values[(n % per_sensor) / spec.seeds.size()];
    const std::uint64_t seed = spec.seeds[n % spec.seeds.size()];
    const InversionConfig c = config_for(s, nf, seed);
    reps[n] = cached(store, cell_key("nf", scenario, c), labels_for(s, nf), seed, [&] {
      const auto stream = make_measurements(truth, scenario.mesh, scenario.params, cells[s], c.noise, c.seed);
      return from_result(run_ann_eks(model_for(s), stream, scenario.params, c));
    });
  });

  NfSweepResult out;
  out.replicates = reps;
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    const MeasurementStream stream =
        make_measurements(truth, scenario.mesh, scenario.params, cells[s], spec.base.noise, spec.seeds.front());
    std::vector<double> best(nf_values.size(), std::numeric_limits<double>::infinity());
    std::vector<bool> failed(nf_values.size(), false);
    // Repeats sweep every nf in turn so slow drift affects all points alike.
    for (int rep = 0; rep < spec.timing_repeats; ++rep) {
      for (std::size_t v = 0; v < nf_values.size(); ++v) {
        if (failed[v]) continue;
        try {
          const InversionConfig c = config_for(s, nf_values[v], spec.seeds.front());
          best[v] = std::min(best[v], run_ann_eks(model_for(s), stream, scenario.params, c).cpu_step_ms);
        } catch (const Error&) {
          failed[v] = true;
          best[v] = std::numeric_limits<double>::infinity();
        }
      }
    }
    std::vector<double> xs, ys;
    for (std::size_t v = 0; v < nf_values.size(); ++v) {
      NfPoint p;
      p.x = sensors[s].first;
      p.y = sensors[s].second;
      p.nf = nf_values[v];
      std::vector<Replicate> cell(reps.begin() + static_cast<std::ptrdiff_t>(s * per_sensor + v * spec.seeds.size()),
                                  reps.begin() + static_cast<std::ptrdiff_t>(s * per_sensor + (v + 1) * spec.seeds.size()));
      p.ae = median_ae(cell);
      p.cpu_step_ms = best[v];
      if (std::isfinite(p.cpu_step_ms)) {
        xs.push_back(static_cast<double>(p.nf));
        ys.push_back(p.cpu_step_ms);
      }
      out.points.push_back(p);
    }
    out.timing_fits.push_back(xs.size() >= 2 ? fit_line(xs, ys) : LinearFit{});
  }
  return out;
}

nlohmann::json ComparisonResult::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : rows)
    list.push_back({{"algorithm", to_string(r.algorithm)},
                    {"noise", r.noise},
                    {"horizon", r.horizon},
                    {"AE", number_or_null(r.ae)},
                    {"mean_step_ms", r.mean_step_ms},
                    {"replicate_ae", r.replicate_ae}});
  return {{"kind", "compare"}, {"rows", list}, {"replicates", replicates_json(replicates)}};
}

const ComparisonRow* ComparisonResult::find(Algorithm algorithm, double noise, std::size_t horizon) const {
  for (const auto& r : rows)
    if (r.algorithm == algorithm && r.noise == noise && r.horizon == horizon) return &r;
  return nullptr;
}

ComparisonResult algorithm_comparison(const Scenario& scenario, const SweepSpec& spec, ResultStore& store) {
  spec.validate();
  require(!spec.noise_levels.empty(), ErrorKind::InvalidArgument, "algorithm_comparison: no noise levels");
  const CellIndex sensor = node_index(spec.base.sensor_x, spec.base.sensor_y, scenario.mesh, scenario.params);
  const FluxSignal truth = render_manifest(scenario.testing, scenario.mesh.dt).signal;
  const ReducedAnnModel ann = load_or_train_surrogates(scenario, sensor).reduced_model();
  const MlpModel inverse = load_or_train_inverse_ann(scenario, sensor, spec.base);
  const CfdTransferModel cfd(scenario.mesh, scenario.params, sensor);

  struct Arm {
    Algorithm algorithm;
    std::size_t horizon;
  };
  std::vector<Arm> arms{{Algorithm::AnnEks, 0}, {Algorithm::InverseAnn, 0}};
  if (spec.include_cfd) {
    arms.push_back({Algorithm::AnnEks, spec.cfd_horizon});
    arms.push_back({Algorithm::CfdEks, spec.cfd_horizon});
  }

  const std::size_t n_seeds = spec.seeds.size();
  std::vector<std::vector<Replicate>> reps(spec.noise_levels.size() * n_seeds);
  parallel_for(spec.jobs, reps.size(), [&](std::size_t n) {
    const double m = spec.noise_levels[n / n_seeds];
    const std::uint64_t seed = spec.seeds[n % n_seeds];
    std::optional<MeasurementStream> stream;
    for (const Arm& arm : arms) {
      InversionConfig c = spec.base;
      c.algorithm = arm.algorithm;
      c.noise = m;
      c.seed = seed;
      c.horizon = arm.horizon;
      const std::map<std::string, std::string> labels{{"algorithm", to_string(arm.algorithm)},
                                                      {"noise", io::format_double(m)},
                                                      {"horizon", std::to_string(arm.horizon)}};
      reps[n].push_back(cached(store, cell_key("compare", scenario, c), labels, seed, [&] {
        if (!stream) stream = make_measurements(truth, scenario.mesh, scenario.params, sensor, m, seed);
        switch (arm.algorithm) {
          case Algorithm::AnnEks: return from_result(run_ann_eks(ann, *stream, scenario.params, c));
          case Algorithm::CfdEks: return from_result(run_cfd_eks(cfd, *stream, scenario.params, c));
          case Algorithm::InverseAnn: return from_result(run_inverse_ann(inverse, *stream, c));
        }
        fail(ErrorKind::Internal, "algorithm_comparison: unhandled algorithm");
      }));
    }
  });

  ComparisonResult out;
  for (std::size_t v = 0; v < spec.noise_levels.size(); ++v) {
    for (std::size_t a = 0; a < arms.size(); ++a) {
      ComparisonRow row;
      row.algorithm = arms[a].algorithm;
      row.noise = spec.noise_levels[v];
      row.horizon = arms[a].horizon;
      std::vector<Replicate> cell;
      std::vector<double> ms;
      for (std::size_t s = 0; s < n_seeds; ++s) {
        const Replicate& r = reps[v * n_seeds + s][a];
        cell.push_back(r);
        row.replicate_ae.push_back(r.ae);
        ms.push_back(r.mean_step_ms);
      }
      row.ae = median_ae(cell);
      row.mean_step_ms = median(ms);
      out.rows.push_back(std::move(row));
      out.replicates.insert(out.replicates.end(), cell.begin(), cell.end());
    }
  }
  return out;
}

}  // namespace ihtp
