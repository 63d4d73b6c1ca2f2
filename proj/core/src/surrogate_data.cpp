#include "ihtp/surrogate_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ihtp/error.hpp"
#include "ihtp/io.hpp"

namespace ihtp {

std::array<CellIndex, kLocalDim> LocalStencil::cells() const {
  return {sensor, CellIndex{sensor.i + 1, sensor.j}, CellIndex{sensor.i - 1, sensor.j},
          CellIndex{sensor.i, sensor.j + 1}, CellIndex{sensor.i, sensor.j - 1}};
}

void LocalStencil::validate(const Mesh& mesh) const {
  for (const auto& c : cells())
    require(mesh.contains(c), ErrorKind::InvalidArgument,
            "sensor (" + std::to_string(sensor.i) + "," + std::to_string(sensor.j) +
                ") lacks a neighbour inside the mesh");
}

nlohmann::json LocalStencil::to_json() const {
  // The +y/-y pair completes the symmetric five-point stencil.
  return {{"sensor", {sensor.i, sensor.j}},
          {"offsets",
           {{"x_plus", {1, 0}}, {"x_minus", {-1, 0}}, {"y_plus", {0, 1}}, {"y_minus", {0, -1}}}}};
}

LocalTemps extract_local_temperatures(const Eigen::Ref<const Eigen::VectorXd>& field, const Mesh& mesh,
                                      const LocalStencil& stencil) {
  LocalTemps out;
  const auto cells = stencil.cells();
  for (int c = 0; c < kLocalDim; ++c) out[c] = field[mesh.flat(cells[c])];
  return out;
}

ReducedState extract_local_state(const TemperatureField& field, const Mesh& mesh, CellIndex sensor, double q) {
  const LocalStencil stencil{sensor};
  stencil.validate(mesh);
  require(field.values.size() == mesh.cells(), ErrorKind::InvalidArgument,
          "extract_local_state: field does not match mesh");
  ReducedState s;
  s.values.head<kLocalDim>() = extract_local_temperatures(field.values, mesh, stencil);
  s.values[kFlux] = q;
  return s;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.input_names = input_names;
  out.output_names = output_names;
  out.inputs.resize(static_cast<Eigen::Index>(indices.size()), inputs.cols());
  out.outputs.resize(static_cast<Eigen::Index>(indices.size()), outputs.cols());
  out.tags.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = static_cast<Eigen::Index>(indices[r]);
    require(src < rows(), ErrorKind::InvalidArgument, "Dataset::subset: index out of range");
    out.inputs.row(static_cast<Eigen::Index>(r)) = inputs.row(src);
    out.outputs.row(static_cast<Eigen::Index>(r)) = outputs.row(src);
    if (!tags.empty()) out.tags.push_back(tags[indices[r]]);
  }
  return out;
}

const std::vector<std::string>& reduced_input_names() {
  static const std::vector<std::string> names{"t_s", "t_xp", "t_xm", "t_yp", "t_ym", "q"};
  return names;
}

const std::vector<std::string>& reduced_output_names() {
  static const std::vector<std::string> names{"t_s_next", "t_xp_next", "t_xm_next", "t_yp_next", "t_ym_next"};
  return names;
}

double PerturbationSpec::step(double x) const { return std::max(relative * std::abs(x), absolute_floor); }

SurrogateDatasets generate_datasets(const FluxSignal& signal, const Mesh& mesh, const PhysicalParams& params,
                                    CellIndex sensor, const PerturbationSpec& perturbation) {
  signal.validate();
  require(std::abs(signal.dt - mesh.dt) <= 1e-12 * mesh.dt, ErrorKind::InvalidArgument,
          "generate_datasets: signal dt does not match mesh dt");
  require(perturbation.relative > 0.0 && perturbation.absolute_floor > 0.0, ErrorKind::InvalidArgument,
          "generate_datasets: perturbation sizes must be positive");
  const LocalStencil stencil{sensor};
  stencil.validate(mesh);
  const auto cells = stencil.cells();
  const auto steps = static_cast<Eigen::Index>(signal.size());
  constexpr int kPerStep = 2 * kReducedDim;

  SurrogateDatasets out;
  for (Dataset* d : {&out.transfer, &out.sensitivity}) {
    d->input_names = reduced_input_names();
    d->output_names = reduced_output_names();
  }
  out.transfer.inputs.resize(steps, kReducedDim);
  out.transfer.outputs.resize(steps, kLocalDim);
  out.transfer.tags.assign(static_cast<std::size_t>(steps), SampleTag::Transfer);
  out.sensitivity.inputs.resize(steps * kPerStep, kReducedDim);
  out.sensitivity.outputs.resize(steps * kPerStep, kLocalDim);
  out.sensitivity.tags.assign(static_cast<std::size_t>(steps * kPerStep), SampleTag::Sensitivity);

  Eigen::VectorXd field = Eigen::VectorXd::Constant(mesh.cells(), params.inlet_temperature);
  Eigen::VectorXd next(mesh.cells());
  Eigen::VectorXd perturbed(mesh.cells());
  Eigen::VectorXd perturbed_next(mesh.cells());

  for (Eigen::Index k = 0; k < steps; ++k) {
    const double q = signal.samples[static_cast<std::size_t>(k)];
    ReducedVector nominal;
    nominal.head<kLocalDim>() = extract_local_temperatures(field, mesh, stencil);
    nominal[kFlux] = q;

    advance_step_into(field, q, mesh, params, next);
    out.transfer.inputs.row(k) = nominal.transpose();
    out.transfer.outputs.row(k) = extract_local_temperatures(next, mesh, stencil).transpose();

    for (int c = 0; c < kReducedDim; ++c) {
      const double h = perturbation.step(nominal[c]);
      for (int s = 0; s < 2; ++s) {
        const double delta = s == 0 ? h : -h;
        ReducedVector input = nominal;
        input[c] += delta;
        double q_step = q;
        perturbed = field;
        if (c == kFlux) {
          q_step = input[kFlux];
        } else {
          perturbed[mesh.flat(cells[c])] = input[c];
        }
        advance_step_into(perturbed, q_step, mesh, params, perturbed_next);
        const Eigen::Index row = k * kPerStep + 2 * c + s;
        out.sensitivity.inputs.row(row) = input.transpose();
        out.sensitivity.outputs.row(row) = extract_local_temperatures(perturbed_next, mesh, stencil).transpose();
      }
    }
    field.swap(next);
  }
  return out;
}

nlohmann::json dataset_manifest(const SignalManifest& signal, const Mesh& mesh, const PhysicalParams& params,
                                CellIndex sensor, const PerturbationSpec& perturbation) {
  return {{"format", "ihtp-dataset-manifest"},
          {"signal", signal.to_json()},
          {"signal_hash", signal.hash()},
          {"stencil", LocalStencil{sensor}.to_json()},
          {"mesh", {{"nx", mesh.nx}, {"ny", mesh.ny}, {"dx", mesh.dx}, {"dy", mesh.dy}, {"dt", mesh.dt}}},
          {"params",
           {{"conductivity", params.conductivity},
            {"density", params.density},
            {"specific_heat", params.specific_heat},
            {"length", params.length},
            {"height", params.height},
            {"mean_velocity", params.mean_velocity},
            {"inlet_temperature", params.inlet_temperature}}},
          {"perturbation", {{"relative", perturbation.relative}, {"absolute_floor", perturbation.absolute_floor}}}};
}

ChannelScaler::ChannelScaler(std::vector<std::string> names, Eigen::VectorXd mean, Eigen::VectorXd stddev)
    : names_(std::move(names)), mean_(std::move(mean)), std_(std::move(stddev)) {
  require(mean_.size() == std_.size() && static_cast<std::size_t>(mean_.size()) == names_.size(),
          ErrorKind::InvalidArgument, "ChannelScaler: inconsistent channel counts");
  for (Eigen::Index c = 0; c < std_.size(); ++c)
    require(std::isfinite(mean_[c]) && std::isfinite(std_[c]) && std_[c] > 0.0, ErrorKind::InvalidArgument,
            "ChannelScaler: channel '" + names_[static_cast<std::size_t>(c)] + "' has invalid statistics");
}

ChannelScaler ChannelScaler::fit(const Eigen::MatrixXd& rows, std::vector<std::string> names) {
  require(rows.rows() >= 2, ErrorKind::InvalidArgument, "ChannelScaler::fit needs at least two samples");
  require(static_cast<std::size_t>(rows.cols()) == names.size(), ErrorKind::InvalidArgument,
          "ChannelScaler::fit: name count does not match columns");
  const auto n = static_cast<double>(rows.rows());
  Eigen::VectorXd mean = rows.colwise().sum().transpose() / n;
  Eigen::VectorXd stddev(rows.cols());
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const double var = (rows.col(c).array() - mean[c]).square().sum() / n;
    stddev[c] = std::sqrt(var);
    require(stddev[c] > 1e-12 * std::max(1.0, std::abs(mean[c])), ErrorKind::InvalidArgument,
            "constant channel '" + names[static_cast<std::size_t>(c)] + "' cannot be standardized");
  }
  return ChannelScaler(std::move(names), std::move(mean), std::move(stddev));
}

Eigen::MatrixXd ChannelScaler::apply(const Eigen::MatrixXd& rows) const {
  require(rows.cols() == channels(), ErrorKind::InvalidArgument, "ChannelScaler::apply: column mismatch");
  return (rows.rowwise() - mean_.transpose()).array().rowwise() / std_.transpose().array();
}

Eigen::MatrixXd ChannelScaler::invert(const Eigen::MatrixXd& rows) const {
  require(rows.cols() == channels(), ErrorKind::InvalidArgument, "ChannelScaler::invert: column mismatch");
  return (rows.array().rowwise() * std_.transpose().array()).matrix().rowwise() + mean_.transpose();
}

Eigen::VectorXd ChannelScaler::apply(const Eigen::VectorXd& v) const {
  require(v.size() == channels(), ErrorKind::InvalidArgument, "ChannelScaler::apply: length mismatch");
  return (v - mean_).cwiseQuotient(std_);
}

Eigen::VectorXd ChannelScaler::invert(const Eigen::VectorXd& v) const {
  require(v.size() == channels(), ErrorKind::InvalidArgument, "ChannelScaler::invert: length mismatch");
  return v.cwiseProduct(std_) + mean_;
}

nlohmann::json ChannelScaler::to_json() const {
  return {{"names", names_},
          {"mean", std::vector<double>(mean_.data(), mean_.data() + mean_.size())},
          {"std", std::vector<double>(std_.data(), std_.data() + std_.size())}};
}

ChannelScaler ChannelScaler::from_json(const nlohmann::json& doc) {
  const auto mean = doc.at("mean").get<std::vector<double>>();
  const auto sd = doc.at("std").get<std::vector<double>>();
  return ChannelScaler(doc.at("names").get<std::vector<std::string>>(),
                       Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size())),
                       Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size())));
}

Standardizer Standardizer::fit(const Dataset& data) {
  return {ChannelScaler::fit(data.inputs, data.input_names), ChannelScaler::fit(data.outputs, data.output_names)};
}

SplitIndices split(std::size_t n, const SplitFractions& f, std::uint64_t seed) {
  require(f.train >= 0 && f.validation >= 0 && f.test >= 0, ErrorKind::InvalidArgument,
          "split fractions must be nonnegative");
  require(std::abs(f.train + f.validation + f.test - 1.0) <= 1e-9, ErrorKind::InvalidArgument,
          "split fractions must sum to 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
  const auto n_val =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(f.validation * static_cast<double>(n))));
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                        order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return out;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::vector<std::string> header = data.input_names;
  header.insert(header.end(), data.output_names.begin(), data.output_names.end());
  header.push_back("tag");
  io::CsvWriter csv(path, header);
  std::vector<std::string> cells(header.size());
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    std::size_t c = 0;
    for (Eigen::Index i = 0; i < data.inputs.cols(); ++i) cells[c++] = io::format_double(data.inputs(r, i));
    for (Eigen::Index i = 0; i < data.outputs.cols(); ++i) cells[c++] = io::format_double(data.outputs(r, i));
    cells[c] = data.tags.empty() || data.tags[static_cast<std::size_t>(r)] == SampleTag::Transfer ? "transfer"
                                                                                                  : "sensitivity";
    csv.row(std::span<const std::string>(cells));
  }
  csv.close();
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  Dataset d;
  const auto tag_col = table.column("tag");
  const std::size_t n_in = reduced_input_names().size();
  for (std::size_t c = 0; c < tag_col; ++c) (c < n_in ? d.input_names : d.output_names).push_back(table.header[c]);
  const auto rows = static_cast<Eigen::Index>(table.rows.size());
  d.inputs.resize(rows, static_cast<Eigen::Index>(d.input_names.size()));
  d.outputs.resize(rows, static_cast<Eigen::Index>(d.output_names.size()));
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto rr = static_cast<std::size_t>(r);
    for (Eigen::Index c = 0; c < d.inputs.cols(); ++c) d.inputs(r, c) = table.number(rr, static_cast<std::size_t>(c));
    for (Eigen::Index c = 0; c < d.outputs.cols(); ++c)
      d.outputs(r, c) = table.number(rr, static_cast<std::size_t>(c + d.inputs.cols()));
    const auto& tag = table.rows[rr][tag_col];
    require(tag == "transfer" || tag == "sensitivity", ErrorKind::Io, "dataset CSV has unknown tag '" + tag + "'");
    d.tags.push_back(tag == "transfer" ? SampleTag::Transfer : SampleTag::Sensitivity);
  }
  return d;
}

}  // namespace ihtp
