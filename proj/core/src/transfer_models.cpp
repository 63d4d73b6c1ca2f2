#include "ihtp/transfer_models.hpp"

#include <algorithm>
#include <cmath>

#include "ihtp/error.hpp"

namespace ihtp {

Eigen::MatrixXd numeric_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, const JacobianStep& step) {
  Eigen::MatrixXd jac;
  Eigen::VectorXd probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = std::max(step.relative * std::abs(x[j]), step.absolute_floor);
    probe[j] = x[j] + h;
    const Eigen::VectorXd up = f(probe);
    probe[j] = x[j] - h;
    const Eigen::VectorXd down = f(probe);
    probe[j] = x[j];
    if (j == 0) jac.resize(up.size(), x.size());
    jac.col(j) = (up - down) / (2.0 * h);
  }
  return jac;
}

CfdTransferModel::CfdTransferModel(Mesh mesh, PhysicalParams params, CellIndex sensor, JacobianStep step)
    : mesh_(mesh), params_(params), sensor_(sensor), step_(step) {
  params_.validate();
  mesh_.validate(params_);
  require(mesh_.contains(sensor_), ErrorKind::InvalidArgument, "CfdTransferModel: sensor outside mesh");
}

Eigen::VectorXd CfdTransferModel::transfer(const Eigen::VectorXd& state) const {
  require(state.size() == dimension(), ErrorKind::InvalidArgument, "CfdTransferModel: state size mismatch");
  require(state.allFinite(), ErrorKind::Numerical, "CfdTransferModel: non-finite state");
  const Eigen::Index n = mesh_.cells();
  Eigen::VectorXd next(dimension());
  advance_step_into(state.head(n), state[n], mesh_, params_, next.head(n));
  next[n] = state[n];
  return next;
}

Eigen::MatrixXd CfdTransferModel::jacobian(const Eigen::VectorXd& state) const {
  Eigen::MatrixXd jac = numeric_jacobian([this](const Eigen::VectorXd& s) { return transfer(s); }, state, step_);
  // The flux row is exact by construction: q_{k+1} = q_k.
  jac.row(dimension() - 1).setZero();
  jac(dimension() - 1, dimension() - 1) = 1.0;
  return jac;
}

Eigen::RowVectorXd CfdTransferModel::measurement_row() const {
  Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(dimension());
  h[mesh_.flat(sensor_)] = 1.0;
  return h;
}

Eigen::VectorXd CfdTransferModel::initial_state(double q) const {
  Eigen::VectorXd s = Eigen::VectorXd::Constant(dimension(), params_.inlet_temperature);
  s[mesh_.cells()] = q;
  return s;
}

ReducedAnnModel::ReducedAnnModel(MlpModel transfer_net, MlpModel sensitivity_net, JacobianStep step,
                                 std::string expected_manifest)
    : transfer_(std::move(transfer_net)), sensitivity_(std::move(sensitivity_net)), step_(step) {
  for (const MlpModel* net : {&transfer_, &sensitivity_}) {
    require(net->inputs() == kReducedDim && net->outputs() == kLocalDim, ErrorKind::InvalidArgument,
            "ReducedAnnModel: networks must map 6 inputs to 5 outputs");
    require(net->standardizer.has_value(), ErrorKind::InvalidArgument,
            "ReducedAnnModel: networks need a standardizer");
  }
  require(transfer_.manifest_hash == sensitivity_.manifest_hash, ErrorKind::ManifestMismatch,
          "transfer and sensitivity networks come from different dataset manifests");
  if (!expected_manifest.empty())
    require(transfer_.manifest_hash == expected_manifest, ErrorKind::ManifestMismatch,
            "surrogate manifest " + transfer_.manifest_hash + " does not match the requested configuration " +
                expected_manifest);
}

Eigen::VectorXd ReducedAnnModel::step_with(const MlpModel& net, const Eigen::VectorXd& state) {
  require(state.size() == kReducedDim, ErrorKind::InvalidArgument, "ReducedAnnModel: state must have 6 components");
  require(state.allFinite(), ErrorKind::Numerical, "ReducedAnnModel: non-finite state");
  Eigen::VectorXd next(kReducedDim);
  next.head<kLocalDim>() = net.predict(state);
  next[kFlux] = state[kFlux];
  return next;
}

Eigen::VectorXd ReducedAnnModel::transfer(const Eigen::VectorXd& state) const { return step_with(transfer_, state); }

Eigen::VectorXd ReducedAnnModel::sensitivity_transfer(const Eigen::VectorXd& state) const {
  return step_with(sensitivity_, state);
}

Eigen::MatrixXd ReducedAnnModel::jacobian(const Eigen::VectorXd& state) const {
  Eigen::MatrixXd jac =
      numeric_jacobian([this](const Eigen::VectorXd& s) { return sensitivity_transfer(s); }, state, step_);
  jac.row(kFlux).setZero();
  jac(kFlux, kFlux) = 1.0;
  return jac;
}

Eigen::RowVectorXd ReducedAnnModel::measurement_row() const {
  Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(kReducedDim);
  h[kSensor] = 1.0;
  return h;
}

LinearTransferModel::LinearTransferModel(Eigen::MatrixXd a, Eigen::RowVectorXd h) : a_(std::move(a)), h_(std::move(h)) {
  require(a_.rows() == a_.cols() && h_.size() == a_.rows(), ErrorKind::InvalidArgument,
          "LinearTransferModel: dimension mismatch");
}

}  // namespace ihtp
