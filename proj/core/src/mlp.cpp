#include "ihtp/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Cholesky>

#include "ihtp/error.hpp"
#include "ihtp/io.hpp"

namespace ihtp {

MlpModel::MlpModel(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  require(sizes_.size() >= 2, ErrorKind::InvalidArgument, "MLP needs at least an input and an output layer");
  for (int s : sizes_) require(s >= 1, ErrorKind::InvalidArgument, "MLP layer sizes must be positive");
  for (std::size_t l = 1; l < sizes_.size(); ++l)
    layers_.push_back({Eigen::MatrixXd::Zero(sizes_[l], sizes_[l - 1]), Eigen::VectorXd::Zero(sizes_[l])});
}

MlpModel MlpModel::zeros(std::vector<int> layer_sizes) { return MlpModel(std::move(layer_sizes)); }

MlpModel MlpModel::random(std::vector<int> layer_sizes, std::uint64_t seed) {
  MlpModel m(std::move(layer_sizes));
  std::mt19937_64 rng(seed);
  for (auto& layer : m.layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weights.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = dist(rng);
    for (Eigen::Index r = 0; r < layer.biases.size(); ++r) layer.biases[r] = dist(rng);
  }
  return m;
}

Eigen::Index MlpModel::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.biases.size();
  return n;
}

Eigen::VectorXd MlpModel::parameters() const {
  Eigen::VectorXd theta(parameter_count());
  Eigen::Index p = 0;
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) theta[p++] = l.weights(r, c);
    for (Eigen::Index r = 0; r < l.biases.size(); ++r) theta[p++] = l.biases[r];
  }
  return theta;
}

void MlpModel::set_parameters(const Eigen::Ref<const Eigen::VectorXd>& theta) {
  require(theta.size() == parameter_count(), ErrorKind::InvalidArgument, "set_parameters: wrong length");
  Eigen::Index p = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = theta[p++];
    for (Eigen::Index r = 0; r < l.biases.size(); ++r) l.biases[r] = theta[p++];
  }
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input) {
  require(input.size() == model.inputs(), ErrorKind::InvalidArgument,
          "MLP forward: expected " + std::to_string(model.inputs()) + " inputs, got " +
              std::to_string(input.size()));
  const auto& layers = model.layers();
  Eigen::VectorXd a = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::VectorXd z = layers[l].weights * a + layers[l].biases;
    a = (l + 1 < layers.size()) ? Eigen::VectorXd(z.array().tanh()) : z;
  }
  return a;
}

Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  require(inputs.cols() == model.inputs(), ErrorKind::InvalidArgument, "MLP forward_batch: column mismatch");
  const auto& layers = model.layers();
  Eigen::MatrixXd a = inputs.transpose();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = (layers[l].weights * a).colwise() + layers[l].biases;
    a = (l + 1 < layers.size()) ? Eigen::MatrixXd(z.array().tanh()) : z;
  }
  return a.transpose();
}

Eigen::VectorXd MlpModel::predict(const Eigen::VectorXd& physical_input) const {
  require(standardizer.has_value(), ErrorKind::InvalidArgument, "MlpModel::predict: model has no standardizer");
  return standardizer->output.invert(forward(*this, standardizer->input.apply(physical_input)));
}

namespace {

// Writes d(output_o)/d(theta) into column (col0 + o) of `jt` (parameters x columns).
void fill_jacobian_columns(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input,
                           Eigen::Ref<Eigen::MatrixXd> jt, Eigen::Index col0, std::vector<Eigen::VectorXd>& acts,
                           Eigen::VectorXd* output) {
  const auto& layers = model.layers();
  const std::size_t L = layers.size();
  acts.resize(L + 1);
  acts[0] = input;
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::VectorXd z = layers[l].weights * acts[l] + layers[l].biases;
    acts[l + 1] = (l + 1 < L) ? Eigen::VectorXd(z.array().tanh()) : z;
  }
  if (output) *output = acts[L];

  // Layer offsets in the flattened parameter vector.
  std::vector<Eigen::Index> offset(L);
  Eigen::Index p = 0;
  for (std::size_t l = 0; l < L; ++l) {
    offset[l] = p;
    p += layers[l].weights.size() + layers[l].biases.size();
  }

  const Eigen::Index n_out = model.outputs();
  // delta(o, r): d(output_o)/d(z_r) for the layer being processed.
  Eigen::MatrixXd delta = Eigen::MatrixXd::Identity(n_out, n_out);
  for (std::size_t li = L; li-- > 0;) {
    const auto& W = layers[li].weights;
    const Eigen::VectorXd& a_prev = acts[li];
    const Eigen::Index rows = W.rows();
    const Eigen::Index cols = W.cols();
    for (Eigen::Index o = 0; o < n_out; ++o) {
      auto col = jt.col(col0 + o);
      Eigen::Index q = offset[li];
      for (Eigen::Index r = 0; r < rows; ++r) {
        const double d = delta(o, r);
        col.segment(q, cols) = d * a_prev;
        q += cols;
      }
      col.segment(q, rows) = delta.row(o).transpose();
    }
    if (li > 0) {
      Eigen::MatrixXd next = delta * W;
      const Eigen::ArrayXd deriv = 1.0 - a_prev.array().square();
      delta = next.array().rowwise() * deriv.transpose();
    }
  }
}

}  // namespace

Eigen::MatrixXd jacobian_wrt_weights(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input) {
  require(input.size() == model.inputs(), ErrorKind::InvalidArgument, "MLP jacobian: input length mismatch");
  Eigen::MatrixXd jt(model.parameter_count(), model.outputs());
  std::vector<Eigen::VectorXd> acts;
  fill_jacobian_columns(model, input, jt, 0, acts, nullptr);
  return jt.transpose();
}

double mean_squared_error(const MlpModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
  require(inputs.rows() == targets.rows() && inputs.rows() > 0, ErrorKind::InvalidArgument,
          "mean_squared_error: sample count mismatch");
  return (forward_batch(model, inputs) - targets).squaredNorm() / static_cast<double>(targets.size());
}

double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  require(a.size() == b.size() && a.size() >= 2, ErrorKind::InvalidArgument, "pearson: need two equal series");
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double denom = std::sqrt((da * da).sum() * (db * db).sum());
  require(denom > 0.0, ErrorKind::Numerical, "pearson: a series is constant");
  return std::clamp((da * db).sum() / denom, -1.0, 1.0);
}

double regression_r(const MlpModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
  require(inputs.rows() >= 2 && inputs.rows() == targets.rows(), ErrorKind::InvalidArgument,
          "regression_r needs at least two samples");
  const Eigen::MatrixXd pred = forward_batch(model, inputs);
  return pearson(Eigen::Map<const Eigen::VectorXd>(pred.data(), pred.size()),
                 Eigen::Map<const Eigen::VectorXd>(targets.data(), targets.size()));
}

void TrainConfig::validate() const {
  require(max_iterations >= 1, ErrorKind::InvalidArgument, "TrainConfig: max_iterations must be >= 1");
  require(patience >= 1, ErrorKind::InvalidArgument, "TrainConfig: patience must be >= 1");
  require(initial_damping > 0 && damping_increase > 1 && damping_decrease > 1 && max_damping > initial_damping,
          ErrorKind::InvalidArgument, "TrainConfig: invalid damping schedule");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"max_iterations", max_iterations}, {"patience", patience},
          {"initial_damping", initial_damping}, {"damping_increase", damping_increase},
          {"damping_decrease", damping_decrease}, {"max_damping", max_damping},
          {"min_gradient", min_gradient}, {"goal_mse", goal_mse}, {"seed", seed}};
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::MaxIterations: return "max_iterations";
    case StopReason::ValidationPatience: return "validation_patience";
    case StopReason::DampingLimit: return "damping_limit";
    case StopReason::MinGradient: return "min_gradient";
    case StopReason::Goal: return "goal";
  }
  return "unknown";
}

nlohmann::json TrainReport::to_json() const {
  return {{"iterations", iterations}, {"train_mse", train_mse}, {"validation_mse", validation_mse},
          {"test_mse", test_mse}, {"regression_r", regression_r}, {"stop_reason", to_string(stop_reason)},
          {"best_iteration", best_iteration}, {"final_damping", final_damping}, {"config", config.to_json()},
          {"seconds", seconds}, {"sse_history", sse_history}};
}

namespace {

struct NormalEquations {
  Eigen::MatrixXd jtj;
  Eigen::VectorXd jtr;
  double sse = 0.0;
};

NormalEquations assemble(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::Index P = model.parameter_count();
  const Eigen::Index n_out = model.outputs();
  constexpr Eigen::Index kChunk = 512;
  NormalEquations ne{Eigen::MatrixXd::Zero(P, P), Eigen::VectorXd::Zero(P), 0.0};
  Eigen::MatrixXd jt(P, kChunk * n_out);
  Eigen::VectorXd r(kChunk * n_out);
  Eigen::VectorXd out;
  std::vector<Eigen::VectorXd> acts;
  for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
    const Eigen::Index count = std::min(kChunk, x.rows() - start);
    for (Eigen::Index s = 0; s < count; ++s) {
      fill_jacobian_columns(model, x.row(start + s).transpose(), jt, s * n_out, acts, &out);
      r.segment(s * n_out, n_out) = y.row(start + s).transpose() - out;
    }
    const Eigen::Index cols = count * n_out;
    ne.jtj.selfadjointView<Eigen::Lower>().rankUpdate(jt.leftCols(cols));
    ne.jtr.noalias() += jt.leftCols(cols) * r.head(cols);
    ne.sse += r.head(cols).squaredNorm();
  }
  ne.jtj.triangularView<Eigen::StrictlyUpper>() = ne.jtj.transpose();
  return ne;
}

double sse_of(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  return (forward_batch(model, x) - y).squaredNorm();
}

}  // namespace

TrainResult train_levenberg_marquardt(MlpModel model, const Eigen::MatrixXd& train_x, const Eigen::MatrixXd& train_y,
                                      const Eigen::MatrixXd& val_x, const Eigen::MatrixXd& val_y,
                                      const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  require(train_x.rows() > 0 && val_x.rows() > 0, ErrorKind::InvalidArgument,
          "train_levenberg_marquardt: training and validation sets must be nonempty");
  require(train_x.rows() == train_y.rows() && val_x.rows() == val_y.rows(), ErrorKind::InvalidArgument,
          "train_levenberg_marquardt: input/target row mismatch");
  require(train_x.cols() == model.inputs() && train_y.cols() == model.outputs(), ErrorKind::InvalidArgument,
          "train_levenberg_marquardt: data does not match layer sizes");

  const auto validation_mse = [&](int iteration) {
    const double v = (forward_batch(model, val_x) - val_y).squaredNorm() / static_cast<double>(val_y.size());
    return hooks.validation_override ? hooks.validation_override(iteration, v) : v;
  };

  TrainReport report;
  report.config = config;
  Eigen::VectorXd theta = model.parameters();
  NormalEquations ne = assemble(model, train_x, train_y);
  if (!std::isfinite(ne.sse)) fail(ErrorKind::TrainingFailure, "training loss is not finite at initialization");

  double best_val = validation_mse(0);
  Eigen::VectorXd best_theta = theta;
  int stale = 0;
  double lambda = config.initial_damping;
  const double n_elems = static_cast<double>(train_y.size());
  bool stopped = false;
  bool solve_failed = false;

  for (int it = 1; it <= config.max_iterations && !stopped; ++it) {
    if (ne.jtr.cwiseAbs().maxCoeff() < config.min_gradient) {
      report.stop_reason = StopReason::MinGradient;
      stopped = true;
      break;
    }
    bool accepted = false;
    double new_sse = 0.0;
    Eigen::VectorXd candidate;
    while (!accepted) {
      Eigen::MatrixXd a = ne.jtj;
      a.diagonal().array() += lambda;
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      Eigen::VectorXd delta;
      if (llt.info() == Eigen::Success) delta = llt.solve(ne.jtr);
      if (llt.info() == Eigen::Success && delta.allFinite()) {
        candidate = theta + delta;
        model.set_parameters(candidate);
        new_sse = sse_of(model, train_x, train_y);
        if (std::isfinite(new_sse) && new_sse < ne.sse) {
          accepted = true;
          lambda = std::max(lambda / config.damping_decrease, 1e-20);
          break;
        }
      } else {
        solve_failed = true;
      }
      lambda *= config.damping_increase;
      if (lambda > config.max_damping) break;
    }
    if (!accepted) {
      model.set_parameters(theta);
      if (report.iterations == 0 && solve_failed)
        fail(ErrorKind::TrainingFailure, "normal equations stayed singular up to the damping limit");
      report.stop_reason = StopReason::DampingLimit;
      stopped = true;
      break;
    }

    theta = candidate;
    report.iterations = it;
    report.sse_history.push_back(new_sse);
    ne = assemble(model, train_x, train_y);

    const double v = validation_mse(it);
    if (!std::isfinite(v)) fail(ErrorKind::TrainingFailure, "validation loss became non-finite");
    if (v < best_val) {
      best_val = v;
      best_theta = theta;
      report.best_iteration = it;
      stale = 0;
    } else if (++stale >= config.patience) {
      report.stop_reason = StopReason::ValidationPatience;
      stopped = true;
    }
    if (!stopped && ne.sse / n_elems <= config.goal_mse) {
      report.stop_reason = StopReason::Goal;
      stopped = true;
    }
  }
  if (!stopped) report.stop_reason = StopReason::MaxIterations;

  model.set_parameters(best_theta);
  report.train_mse = sse_of(model, train_x, train_y) / n_elems;
  report.validation_mse = (forward_batch(model, val_x) - val_y).squaredNorm() / static_cast<double>(val_y.size());
  report.final_damping = lambda;
  return {std::move(model), std::move(report)};
}

nlohmann::json MlpModel::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) {
    std::vector<double> w;
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    layers.push_back({{"weights", w}, {"biases", std::vector<double>(l.biases.data(), l.biases.data() + l.biases.size())}});
  }
  nlohmann::json doc{{"format", "ihtp-mlp"},
                     {"version", 1},
                     {"layer_sizes", sizes_},
                     {"hidden_activation", "tanh"},
                     {"output_activation", "identity"},
                     {"layers", layers},
                     {"manifest_hash", manifest_hash},
                     {"metadata", metadata}};
  if (standardizer)
    doc["standardizer"] = {{"input", standardizer->input.to_json()}, {"output", standardizer->output.to_json()}};
  return doc;
}

MlpModel MlpModel::from_json(const nlohmann::json& doc) {
  try {
    require(doc.value("format", "") == "ihtp-mlp", ErrorKind::Io, "not an ihtp-mlp model document");
    MlpModel m(doc.at("layer_sizes").get<std::vector<int>>());
    const auto& layers = doc.at("layers");
    require(layers.size() == m.layers_.size(), ErrorKind::Io, "model layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto w = layers[l].at("weights").get<std::vector<double>>();
      const auto b = layers[l].at("biases").get<std::vector<double>>();
      auto& dst = m.layers_[l];
      require(static_cast<Eigen::Index>(w.size()) == dst.weights.size() &&
                  static_cast<Eigen::Index>(b.size()) == dst.biases.size(),
              ErrorKind::Io, "model layer " + std::to_string(l) + " has the wrong parameter count");
      std::size_t p = 0;
      for (Eigen::Index r = 0; r < dst.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < dst.weights.cols(); ++c) dst.weights(r, c) = w[p++];
      for (Eigen::Index r = 0; r < dst.biases.size(); ++r) dst.biases[r] = b[static_cast<std::size_t>(r)];
    }
    m.manifest_hash = doc.value("manifest_hash", "");
    m.metadata = doc.value("metadata", nlohmann::json::object());
    if (doc.contains("standardizer"))
      m.standardizer = Standardizer{ChannelScaler::from_json(doc["standardizer"].at("input")),
                                    ChannelScaler::from_json(doc["standardizer"].at("output"))};
    require(m.parameters().allFinite(), ErrorKind::Io, "model has non-finite parameters");
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, std::string("malformed model document: ") + e.what());
  }
}

void MlpModel::save(const std::filesystem::path& path) const { io::write_json(path, to_json()); }

MlpModel MlpModel::load(const std::filesystem::path& path) {
  require(std::filesystem::exists(path), ErrorKind::Io, "model file '" + path.string() + "' not found");
  return from_json(io::read_json(path));
}

}  // namespace ihtp
