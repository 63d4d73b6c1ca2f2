#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ihtp/error.hpp"
#include "ihtp/experiments.hpp"
#include "ihtp/inversion.hpp"
#include "ihtp/io.hpp"
#include "ihtp/oracles.hpp"
#include "ihtp/run_manifest.hpp"
#include "ihtp/surrogate_data.hpp"

namespace fs = std::filesystem;
using namespace ihtp;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return 3;
    case ErrorKind::Domain: return 4;
    case ErrorKind::Numerical: return 5;
    case ErrorKind::Io: return 6;
    case ErrorKind::ManifestMismatch: return 7;
    case ErrorKind::TrainingFailure: return 8;
    case ErrorKind::Internal: return 9;
  }
  return 9;
}

// Every flag writes into a config key; flags given on the command line
// override the same key from --config.
class Flags {
 public:
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto* opt = app->add_option(flag, values_[key], help);
    options_.push_back({opt, key});
    return opt;
  }
  CLI::Option* add_switch(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto* opt = app->add_flag(flag, switches_[key], help);
    options_.push_back({opt, key});
    return opt;
  }
  CLI::Option* add_list(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto* opt = app->add_option(flag, lists_[key], help);
    options_.push_back({opt, key});
    return opt;
  }

  KeyValueConfig overrides() const {
    KeyValueConfig kv;
    for (const auto& [opt, key] : options_) {
      if (opt->count() == 0) continue;
      if (auto it = values_.find(key); it != values_.end()) kv.set(key, it->second);
      if (auto it = switches_.find(key); it != switches_.end()) kv.set(key, it->second ? "true" : "false");
      if (auto it = lists_.find(key); it != lists_.end()) {
        std::string joined;
        for (const auto& v : it->second) joined += (joined.empty() ? "" : ";") + v;
        kv.set(key, joined);
      }
    }
    return kv;
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [opt, key] : options_) out.push_back(key);
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> switches_;
  std::map<std::string, std::vector<std::string>> lists_;
  std::vector<std::pair<CLI::Option*, std::string>> options_;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  require(ec == std::errc() && ptr == end, ErrorKind::InvalidArgument, what + ": '" + text + "' is not a number");
  return v;
}

std::pair<double, double> to_point(const std::string& text, const std::string& what) {
  const auto parts = split(text, ',');
  require(parts.size() == 2, ErrorKind::InvalidArgument, what + ": expected x,y but got '" + text + "'");
  return {to_double(parts[0], what), to_double(parts[1], what)};
}

std::vector<double> to_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& p : split(text, ',')) out.push_back(to_double(p, what));
  return out;
}

// "0:30" (inclusive range) or "0,6,12".
std::vector<std::size_t> to_counts(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  if (text.find(':') != std::string::npos) {
    const auto ends = split(text, ':');
    require(ends.size() == 2, ErrorKind::InvalidArgument, what + ": expected a:b");
    const double lo = to_double(ends[0], what), hi = to_double(ends[1], what);
    require(lo >= 0 && hi >= lo, ErrorKind::InvalidArgument, what + ": empty range");
    for (auto v = static_cast<std::size_t>(lo); v <= static_cast<std::size_t>(hi); ++v) out.push_back(v);
    return out;
  }
  for (double v : to_doubles(text, what)) {
    require(v >= 0 && v == std::floor(v), ErrorKind::InvalidArgument, what + ": values must be whole numbers >= 0");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

struct FluxSource {
  FluxSignal signal;
  std::string hash;
  std::optional<SignalManifest> manifest;
};

FluxSource load_flux(const std::string& spec, double dt) {
  FluxSource out;
  if (spec == "builtin-train" || spec == "builtin-test") {
    out.manifest = spec == "builtin-train" ? builtin_training_manifest() : builtin_testing_manifest();
  } else if (fs::path(spec).extension() == ".json") {
    out.manifest = SignalManifest::from_json(io::read_json(spec));
  } else {
    out.signal = read_signal_csv(spec);
    out.hash = io::fnv1a_hex(io::read_text(spec));
    return out;
  }
  out.signal = render_manifest(*out.manifest, dt).signal;
  out.hash = out.manifest->hash();
  return out;
}

const std::vector<std::string> kFilterKeys{"q_temperature", "q_flux", "prior_temperature", "prior_flux", "r_floor",
                                           "rts_form"};

InversionConfig inversion_config(const KeyValueConfig& kv) {
  InversionConfig c;
  c.algorithm = algorithm_from_string(kv.get_or("algorithm", "ann_eks"));
  if (auto s = kv.get("sensor")) std::tie(c.sensor_x, c.sensor_y) = to_point(*s, "sensor");
  c.nf = static_cast<std::size_t>(kv.get_int("nf", 18));
  c.noise = kv.get_double("noise", c.noise);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
  c.horizon = static_cast<std::size_t>(kv.get_int("horizon", 0));
  if (kv.has("np")) c.inverse_np = static_cast<std::size_t>(kv.get_int("np", 0));
  c.inverse_training_noise = kv.get_double("inverse_training_noise", 0.0);
  c.filter.temperature_process_variance = kv.get_double("q_temperature", c.filter.temperature_process_variance);
  c.filter.flux_process_variance = kv.get_double("q_flux", c.filter.flux_process_variance);
  c.filter.prior_temperature_variance = kv.get_double("prior_temperature", c.filter.prior_temperature_variance);
  c.filter.prior_flux_variance = kv.get_double("prior_flux", c.filter.prior_flux_variance);
  c.filter.min_measurement_variance = kv.get_double("r_floor", c.filter.min_measurement_variance);
  const std::string form = kv.get_or("rts_form", "standard");
  require(form == "standard" || form == "filtered_difference", ErrorKind::InvalidArgument,
          "rts_form must be standard or filtered_difference");
  c.filter.form = form == "standard" ? RtsForm::Standard : RtsForm::FilteredDifference;
  c.validate();
  return c;
}

Scenario scenario_from(const KeyValueConfig& kv, bool models_must_exist) {
  Scenario s;
  if (auto p = kv.get("training_manifest")) s.training = SignalManifest::from_json(io::read_json(*p));
  if (auto p = kv.get("testing_manifest")) s.testing = SignalManifest::from_json(io::read_json(*p));
  if (auto ex = kv.get("exclude")) {
    const auto families = split(*ex, ',');
    s.training = s.training.without({families.begin(), families.end()});
  }
  s.surrogates.selection.candidates =
      static_cast<int>(kv.get_int("transfer_candidates", s.surrogates.selection.candidates));
  if (auto m = kv.get("models")) {
    s.cache_dir = *m;
    s.train_missing = !models_must_exist;
  } else {
    s.cache_dir = cache_directory();
  }
  return s;
}

std::size_t jobs_from(const KeyValueConfig& kv) {
  const long long j = kv.get_int("jobs", std::max(1u, std::thread::hardware_concurrency()));
  require(j >= 1, ErrorKind::InvalidArgument, "jobs must be >= 1");
  return static_cast<std::size_t>(j);
}

RunManifest manifest_for(const std::string& command, const KeyValueConfig& kv) {
  return start_manifest(command, kv.to_json());
}

void add_scenario_hashes(RunManifest& m, const Scenario& s) {
  m.input_hashes["training_manifest"] = s.training.hash();
  m.input_hashes["testing_manifest"] = s.testing.hash();
}

void print_json(const nlohmann::json& doc) { std::cout << doc.dump(2) << "\n"; }

// ---- subcommands ----

int cmd_simulate(const KeyValueConfig& kv) {
  const Scenario sc = scenario_from(kv, false);
  const FluxSource flux = load_flux(kv.get_or("flux", "builtin-train"), sc.mesh.dt);
  std::vector<CellIndex> probes;
  std::vector<std::string> header{"k", "t", "q"};
  const auto probe_specs = split(kv.get_or("probe", "0.82,0.089"), ';');
  for (const auto& p : probe_specs) {
    const auto [x, y] = to_point(p, "probe");
    const CellIndex c = node_index(x, y, sc.mesh, sc.params);
    probes.push_back(c);
    header.push_back("T_" + std::to_string(c.i) + "_" + std::to_string(c.j));
  }
  const fs::path out = kv.get_or("out", "probes.csv");
  const TransientResult run = run_transient(flux.signal.samples, sc.mesh, sc.params, probes);
  io::CsvWriter csv(out, header);
  for (std::size_t k = 0; k < flux.signal.size(); ++k) {
    std::vector<double> row{static_cast<double>(k + 1), static_cast<double>(k + 1) * sc.mesh.dt,
                            flux.signal.samples[k]};
    for (const auto& series : run.probes) row.push_back(series[k]);
    csv.row(std::span<const double>(row));
  }
  csv.close();
  RunManifest m = manifest_for("simulate", kv);
  m.input_hashes["flux"] = flux.hash;
  m.write_next_to(out);
  print_json({{"rows", flux.signal.size()}, {"out", out.string()}});
  return 0;
}

int cmd_gen_data(const KeyValueConfig& kv) {
  const Scenario sc = scenario_from(kv, false);
  const FluxSource flux = load_flux(kv.get_or("flux", "builtin-train"), sc.mesh.dt);
  const auto [x, y] = to_point(kv.get_or("sensor", "0.82,0.089"), "sensor");
  const CellIndex sensor = node_index(x, y, sc.mesh, sc.params);
  PerturbationSpec eps;
  eps.relative = kv.get_double("eps", eps.relative);
  const fs::path dir = kv.get_or("out_dir", "datasets");
  fs::create_directories(dir);
  const SurrogateDatasets data = generate_datasets(flux.signal, sc.mesh, sc.params, sensor, eps);
  RunManifest m = manifest_for("gen-data", kv);
  m.input_hashes["flux"] = flux.hash;
  for (const auto& [name, set] : {std::pair{"transfer", &data.transfer}, std::pair{"sensitivity", &data.sensitivity}}) {
    const fs::path path = dir / (std::string(name) + ".csv");
    write_dataset_csv(path, *set);
    m.write_next_to(path);
  }
  nlohmann::json summary{{"transfer_rows", data.transfer.rows()},
                         {"sensitivity_rows", data.sensitivity.rows()},
                         {"sensor", {sensor.i, sensor.j}}};
  if (flux.manifest) summary["dataset"] = dataset_manifest(*flux.manifest, sc.mesh, sc.params, sensor, eps);
  io::write_json(dir / "datasets.json", summary);
  m.write_next_to(dir / "datasets.json");
  print_json(summary);
  return 0;
}

int cmd_train(const KeyValueConfig& kv) {
  Scenario sc = scenario_from(kv, false);
  if (!kv.has("models")) sc.cache_dir = cache_directory();
  const InversionConfig config = inversion_config(kv);
  const CellIndex sensor = node_index(config.sensor_x, config.sensor_y, sc.mesh, sc.params);
  const auto path = surrogate_path(sc.cache_dir, sc.training, sc.mesh, sc.params, sensor, sc.surrogates);
  const SurrogatePair pair = load_or_train_surrogates(sc, sensor);
  RunManifest m = manifest_for("train", kv);
  add_scenario_hashes(m, sc);
  m.seeds["transfer"] = sc.surrogates.transfer.train.seed;
  m.seeds["sensitivity"] = sc.surrogates.sensitivity.train.seed;
  m.write_next_to(path);
  nlohmann::json summary{{"surrogates", path.string()},
                         {"transfer", pair.transfer_report.to_json()},
                         {"sensitivity", pair.sensitivity_report.to_json()}};
  summary["transfer"].erase("sse_history");
  summary["sensitivity"].erase("sse_history");
  if (kv.get_bool("inverse", false)) {
    load_or_train_inverse_ann(sc, sensor, config);
    summary["inverse"] = {{"np", config.past_window()}, {"nf", config.nf}};
  }
  print_json(summary);
  return 0;
}

int cmd_invert(const KeyValueConfig& kv) {
  const Scenario sc = scenario_from(kv, true);
  const InversionConfig config = inversion_config(kv);
  const InversionResult r = run_inversion(config, sc);
  RunManifest m = manifest_for("invert", kv);
  add_scenario_hashes(m, sc);
  m.seeds["root"] = config.seed;
  m.seeds["noise"] = derive_seed(config.seed, "noise");
  const nlohmann::json summary = r.summary();
  if (auto out = kv.get("out")) {
    r.write_csv(*out, sc.mesh.dt);
    m.write_next_to(*out);
  }
  if (auto js = kv.get("json")) {
    io::write_json(*js, summary);
    m.write_next_to(*js);
  }
  print_json(summary);
  return 0;
}

std::vector<std::vector<std::string>> exclusion_sets(const std::string& text) {
  if (text == "standard") return standard_exclusions();
  std::vector<std::vector<std::string>> out;
  for (const auto& set : split(text, ';')) out.push_back(set == "none" ? std::vector<std::string>{} : split(set, '+'));
  return out;
}

int cmd_sweep(const std::string& kind, const KeyValueConfig& kv) {
  const Scenario sc = scenario_from(kv, false);
  SweepSpec spec;
  spec.base = inversion_config(kv);
  spec.jobs = jobs_from(kv);
  if (auto s = kv.get("seeds")) {
    spec.seeds.clear();
    for (std::size_t v : to_counts(*s, "seeds")) spec.seeds.push_back(v);
  }
  spec.sensor_stride = static_cast<int>(kv.get_int("stride", spec.sensor_stride));
  if (auto v = kv.get("nf_values")) spec.nf_values = to_counts(*v, "nf_values");
  if (auto v = kv.get("sensors"))
    for (const auto& p : split(*v, ';')) spec.sensors.push_back(to_point(p, "sensors"));
  if (auto v = kv.get("noise_levels")) spec.noise_levels = to_doubles(*v, "noise_levels");
  spec.exclusions = exclusion_sets(kv.get_or("exclude_sets", "standard"));
  spec.include_cfd = kv.get_bool("cfd", true);
  spec.cfd_horizon = static_cast<std::size_t>(kv.get_int("cfd_horizon", 200));
  spec.timing_repeats = static_cast<int>(kv.get_int("timing_repeats", spec.timing_repeats));
  // Comparison cells are timed, so they never share the machine.
  if (kind == "compare") spec.jobs = 1;

  const fs::path dir = kv.get_or("out_dir", "sweep-" + kind);
  fs::create_directories(dir);
  ResultStore store(dir / "cells");
  RunManifest m = manifest_for("sweep " + kind, kv);
  add_scenario_hashes(m, sc);
  for (auto seed : spec.seeds) m.seeds["replicate_" + std::to_string(seed)] = seed;

  nlohmann::json summary;
  std::vector<Replicate> reps;
  if (kind == "ablation") {
    auto r = ablation_study(sc, spec, store);
    summary = r.to_json();
    reps = r.replicates;
  } else if (kind == "sensors") {
    auto r = sensor_location_sweep(sc, spec, store);
    summary = r.to_json();
    reps = r.replicates;
    r.write_heatmap_csv(dir / "heatmap.csv", sc.mesh);
    m.write_next_to(dir / "heatmap.csv");
  } else if (kind == "nf") {
    auto r = future_step_sweep(sc, spec, store);
    summary = r.to_json();
    reps = r.replicates;
  } else if (kind == "compare") {
    auto r = algorithm_comparison(sc, spec, store);
    summary = r.to_json();
    reps = r.replicates;
  } else {
    fail(ErrorKind::InvalidArgument, "unknown sweep kind '" + kind + "' (ablation, sensors, nf or compare)");
  }
  summary["spec"] = spec.to_json();
  summary["scenario"] = sc.to_json();
  const fs::path csv = dir / (kind + ".csv");
  const fs::path json = dir / (kind + ".json");
  write_replicates_csv(csv, reps);
  io::write_json(json, summary);
  m.write_next_to(csv);
  m.write_next_to(json);
  summary.erase("replicates");
  print_json(summary);
  return 0;
}

int cmd_verify() {
  bool ok = true;
  for (const auto& c : oracle::all_checks()) {
    std::printf("%s  %-48s value=%.3e tol=%.1e  %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.value,
                c.tolerance, c.detail.c_str());
    ok = ok && c.passed;
  }
  return ok ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse heat-flux estimation: forward solver, surrogate training and EKF/RTS inversion"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", library_version());
  std::string config_path;
  app.add_option("--config", config_path, "Flat key = value file; command line flags take precedence")
      ->check(CLI::ExistingFile);
  Flags flags;
  flags.add(&app, "--jobs", "jobs", "Parallel jobs (default: available cores)");
  flags.add(&app, "--models", "models", "Model directory (default: $IHTP_CACHE_DIR or .ihtp-cache)");

  auto add_inversion_flags = [&](CLI::App* sub) {
    flags.add(sub, "--algorithm", "algorithm", "ann_eks, cfd_eks or inverse_ann");
    flags.add(sub, "--noise", "noise", "Measurement noise standard deviation m, K");
    flags.add(sub, "--nf", "nf", "Future steps (smoother lag / inverse window)");
    flags.add(sub, "--np", "np", "Past window of the inverse network (default nf)");
    flags.add(sub, "--sensor", "sensor", "Sensor location x,y in metres");
    flags.add(sub, "--seed", "seed", "Root seed");
    flags.add(sub, "--horizon", "horizon", "Use only the leading steps of the testing signal");
    flags.add(sub, "--rts-form", "rts_form", "standard or filtered_difference");
    flags.add(sub, "--q-temperature", "q_temperature", "Process variance of local temperatures, K^2");
    flags.add(sub, "--q-flux", "q_flux", "Process variance of the flux, (W/m^2)^2");
    flags.add(sub, "--inverse-training-noise", "inverse_training_noise", "Noise added to inverse-ANN inputs");
    flags.add(sub, "--exclude", "exclude", "Training families to drop, e.g. sin,para");
    flags.add(sub, "--transfer-candidates", "transfer_candidates",
              "Transfer-network initializations scored by closed-loop selection");
    flags.add(sub, "--training-manifest", "training_manifest", "Training signal manifest JSON");
    flags.add(sub, "--testing-manifest", "testing_manifest", "Testing signal manifest JSON");
  };

  auto* simulate = app.add_subcommand("simulate", "Run the forward solver and record probe temperatures");
  flags.add(simulate, "--flux", "flux", "builtin-train, builtin-test, a manifest .json or a t,q CSV");
  flags.add_list(simulate, "--probe", "probe", "Probe location x,y (repeatable)");
  flags.add(simulate, "--out", "out", "Output CSV");

  auto* gen = app.add_subcommand("gen-data", "Write transfer and sensitivity datasets");
  flags.add(gen, "--flux", "flux", "builtin-train, builtin-test, a manifest .json or a t,q CSV");
  flags.add(gen, "--sensor", "sensor", "Sensor location x,y in metres");
  flags.add(gen, "--eps", "eps", "Relative perturbation of the sensitivity samples");
  flags.add(gen, "--out-dir", "out_dir", "Output directory");

  auto* train = app.add_subcommand("train", "Train (or load) the surrogate pair for a sensor");
  add_inversion_flags(train);
  flags.add_switch(train, "--inverse", "inverse", "Also train the inverse network");

  auto* invert = app.add_subcommand("invert", "Estimate the wall flux from noisy sensor readings");
  add_inversion_flags(invert);
  flags.add(invert, "--out", "out", "Per-step CSV (k,t,q_true,q_hat,T_meas)");
  flags.add(invert, "--json", "json", "Also write the result summary here");

  auto* sweep = app.add_subcommand("sweep", "Run a study: ablation, sensors, nf or compare");
  std::string sweep_kind;
  sweep->add_option("kind", sweep_kind, "ablation | sensors | nf | compare")
      ->required()
      ->check(CLI::IsMember({"ablation", "sensors", "nf", "compare"}));
  add_inversion_flags(sweep);
  flags.add(sweep, "--out-dir", "out_dir", "Output directory (completed cells are reused)");
  flags.add(sweep, "--seeds", "seeds", "Replicate seeds, e.g. 1,2,3");
  flags.add(sweep, "--stride", "stride", "Sensor sweep: every n-th interior cell");
  flags.add(sweep, "--nf-values", "nf_values", "nf sweep values, a:b or a,b,c");
  flags.add(sweep, "--sensors", "sensors", "nf sweep sensors, x,y;x,y");
  flags.add(sweep, "--noise-levels", "noise_levels", "Comparison noise levels, e.g. 2,5,10,15");
  flags.add(sweep, "--exclude-sets", "exclude_sets", "Ablation sets: standard, or none;sin;step+tri");
  flags.add(sweep, "--cfd", "cfd", "Include CFD-EKS in the comparison (true/false)");
  flags.add(sweep, "--cfd-horizon", "cfd_horizon", "Steps covered by the CFD-EKS comparison");
  flags.add(sweep, "--timing-repeats", "timing_repeats", "nf sweep timing repeats");

  auto* verify = app.add_subcommand("verify", "Run the built-in oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    KeyValueConfig kv;
    if (!config_path.empty()) kv = KeyValueConfig::load(config_path);
    const auto unknown = kv.unknown_keys(flags.keys());
    require(unknown.empty(), ErrorKind::InvalidArgument,
            "unknown config key '" + (unknown.empty() ? std::string() : unknown.front()) + "'");
    kv.merge(flags.overrides());

    if (*simulate) return cmd_simulate(kv);
    if (*gen) return cmd_gen_data(kv);
    if (*train) return cmd_train(kv);
    if (*invert) return cmd_invert(kv);
    if (*sweep) return cmd_sweep(sweep_kind, kv);
    if (*verify) return cmd_verify();
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error [" << to_string(ErrorKind::Io) << "]: malformed JSON: " << e.what() << "\n";
    return exit_code(ErrorKind::Io);
  } catch (const std::exception& e) {
    std::cerr << "error [" << to_string(ErrorKind::Internal) << "]: " << e.what() << "\n";
    return exit_code(ErrorKind::Internal);
  }
  return kExitUsage;
}
