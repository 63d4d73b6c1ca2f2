#pragma once

#include <concepts>
#include <functional>

#include <Eigen/Core>

#include "ihtp/mlp.hpp"
#include "ihtp/physics.hpp"
#include "ihtp/surrogate_data.hpp"

namespace ihtp {

/// A state-transfer model: the flux is the last state component and is carried
/// unchanged (random walk handled by the process noise); the measurement is one
/// state component selected by a constant row.
template <class M>
concept TransferModel = requires(const M& m, const Eigen::VectorXd& x) {
  { m.dimension() } -> std::convertible_to<Eigen::Index>;
  { m.transfer(x) } -> std::convertible_to<Eigen::VectorXd>;
  { m.jacobian(x) } -> std::convertible_to<Eigen::MatrixXd>;
  { m.measurement_row() } -> std::convertible_to<Eigen::RowVectorXd>;
};

struct JacobianStep {
  double relative = 1e-4;
  double absolute_floor = 1e-6;
};

/// Central differences with per-component step max(relative*|x_j|, floor).
Eigen::MatrixXd numeric_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, const JacobianStep& step = {});

/// Full-field model: state = [1250 cell temperatures (Mesh::flat order), q].
class CfdTransferModel {
 public:
  CfdTransferModel(Mesh mesh, PhysicalParams params, CellIndex sensor, JacobianStep step = {});

  Eigen::Index dimension() const { return mesh_.cells() + 1; }
  Eigen::VectorXd transfer(const Eigen::VectorXd& state) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& state) const;
  Eigen::RowVectorXd measurement_row() const;

  /// Uniform inlet-temperature field with the given flux.
  Eigen::VectorXd initial_state(double q) const;
  const Mesh& mesh() const { return mesh_; }
  CellIndex sensor() const { return sensor_; }

 private:
  Mesh mesh_;
  PhysicalParams params_;
  CellIndex sensor_;
  JacobianStep step_;
};

/// Reduced model backed by two networks: the transfer network advances the five
/// local temperatures, the sensitivity network serves the finite-difference Jacobian.
class ReducedAnnModel {
 public:
  /// Throws ErrorKind::ManifestMismatch when the two networks were trained on
  /// different dataset manifests, or when `expected_manifest` is given and differs.
  ReducedAnnModel(MlpModel transfer_net, MlpModel sensitivity_net, JacobianStep step = {},
                  std::string expected_manifest = {});

  Eigen::Index dimension() const { return kReducedDim; }
  Eigen::VectorXd transfer(const Eigen::VectorXd& state) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& state) const;
  Eigen::RowVectorXd measurement_row() const;

  /// Sensitivity-network transfer, the function differentiated by jacobian().
  Eigen::VectorXd sensitivity_transfer(const Eigen::VectorXd& state) const;

  const MlpModel& transfer_net() const { return transfer_; }
  const MlpModel& sensitivity_net() const { return sensitivity_; }

 private:
  static Eigen::VectorXd step_with(const MlpModel& net, const Eigen::VectorXd& state);
  MlpModel transfer_;
  MlpModel sensitivity_;
  JacobianStep step_;
};

/// x_{k+1} = A x_k, y = h x. Used to check the filter against textbook recursions.
class LinearTransferModel {
 public:
  LinearTransferModel(Eigen::MatrixXd a, Eigen::RowVectorXd h);

  Eigen::Index dimension() const { return a_.rows(); }
  Eigen::VectorXd transfer(const Eigen::VectorXd& state) const { return a_ * state; }
  Eigen::MatrixXd jacobian(const Eigen::VectorXd&) const { return a_; }
  Eigen::RowVectorXd measurement_row() const { return h_; }

 private:
  Eigen::MatrixXd a_;
  Eigen::RowVectorXd h_;
};

static_assert(TransferModel<CfdTransferModel>);
static_assert(TransferModel<ReducedAnnModel>);
static_assert(TransferModel<LinearTransferModel>);

}  // namespace ihtp
