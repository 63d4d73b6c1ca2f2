#include <gtest/gtest.h>

#include <cmath>

#include "ihtp/error.hpp"
#include "ihtp/oracles.hpp"
#include "ihtp/physics.hpp"

namespace ihtp {
namespace {

TEST(Physics, MatchesDenseSolveOnSmallMesh) {
  const auto check = oracle::forward_solver(5, 8, 20);
  EXPECT_TRUE(check.passed) << check.value;
  EXPECT_LT(check.value, 1e-10);
}

TEST(Physics, MatchesDenseSolveOnDefaultMeshOneStep) {
  const PhysicalParams params;
  const Mesh mesh;
  Eigen::VectorXd field = Eigen::VectorXd::Constant(mesh.cells(), params.inlet_temperature);
  for (int p = 0; p < mesh.cells(); ++p) field[p] += 0.01 * (p % 17);
  const Eigen::VectorXd fast = advance_step(TemperatureField{field}, 3000.0, mesh, params).values;
  const Eigen::VectorXd dense = oracle::dense_implicit_step(field, 3000.0, mesh, params);
  EXPECT_LT((fast - dense).cwiseAbs().maxCoeff() / dense.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Physics, SteadyEnergyBalance) {
  const auto check = oracle::energy_balance(2500.0, 0.02);
  EXPECT_TRUE(check.passed) << check.detail;
  EXPECT_NEAR(oracle::analytic_bulk_rise(2500.0, PhysicalParams{}), 584.3, 0.05);
}

TEST(Physics, ZeroFluxKeepsInletTemperature) {
  const PhysicalParams params;
  const Mesh mesh;
  TemperatureField f = TemperatureField::uniform(mesh, params.inlet_temperature);
  for (int k = 0; k < 10; ++k) f = advance_step(f, 0.0, mesh, params);
  EXPECT_LT((f.values.array() - params.inlet_temperature).abs().maxCoeff(), 1e-9);
}

TEST(Physics, HeatingRaisesEveryCellAndWallMost) {
  const PhysicalParams params;
  const Mesh mesh;
  TemperatureField f = TemperatureField::uniform(mesh, params.inlet_temperature);
  for (int k = 0; k < 50; ++k) f = advance_step(f, 2500.0, mesh, params);
  for (int i = 0; i < mesh.nx; ++i) {
    EXPECT_GE(f.at(mesh, {i, 0}), params.inlet_temperature);
    for (int j = 1; j < mesh.ny; ++j) EXPECT_GE(f.at(mesh, {i, j}), f.at(mesh, {i, j - 1}) - 1e-12);
  }
}

TEST(Physics, LinearInFluxAboutInletTemperature) {
  const PhysicalParams params;
  const Mesh mesh;
  const TemperatureField f0 = TemperatureField::uniform(mesh, params.inlet_temperature);
  const Eigen::VectorXd a = advance_step(f0, 1000.0, mesh, params).values.array() - params.inlet_temperature;
  const Eigen::VectorXd b = advance_step(f0, 3000.0, mesh, params).values.array() - params.inlet_temperature;
  EXPECT_LT((3.0 * a - b).cwiseAbs().maxCoeff(), 1e-9 * b.cwiseAbs().maxCoeff());
}

TEST(Physics, VelocityProfile) {
  const PhysicalParams p;
  EXPECT_DOUBLE_EQ(velocity_at(p, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(velocity_at(p, p.height), 0.0);
  EXPECT_NEAR(velocity_at(p, 0.5 * p.height), 1.5 * p.mean_velocity, 1e-15);
  EXPECT_THROW(velocity_at(p, -1e-3), Error);
  EXPECT_THROW(velocity_at(p, p.height * 1.01), Error);
}

TEST(Physics, NodeIndexOfBaselineSensor) {
  const PhysicalParams p;
  const Mesh mesh;
  const CellIndex c = node_index(0.82, 0.089, mesh, p);
  EXPECT_EQ(c.i, 20);
  EXPECT_EQ(c.j, 44);
  EXPECT_EQ(node_index(0.0, 0.0, mesh, p), (CellIndex{0, 0}));
  EXPECT_EQ(node_index(p.length, p.height, mesh, p), (CellIndex{mesh.nx - 1, mesh.ny - 1}));
  EXPECT_THROW(node_index(1.5, 0.05, mesh, p), Error);
}

TEST(Physics, RunTransientRecordsProbesPerStep) {
  const PhysicalParams p;
  const Mesh mesh;
  const std::vector<double> q(7, 2000.0);
  const CellIndex probes[] = {{20, 44}, {3, 49}};
  const auto r = run_transient(q, mesh, p, probes);
  ASSERT_EQ(r.probes.size(), 2u);
  EXPECT_EQ(r.probes[0].size(), 7u);
  EXPECT_DOUBLE_EQ(r.probes[1].back(), r.final_field.at(mesh, {3, 49}));
  const CellIndex bad[] = {{25, 0}};
  EXPECT_THROW(run_transient(q, mesh, p, bad), Error);
}

TEST(Physics, MeshValidation) {
  const PhysicalParams p;
  EXPECT_NO_THROW(Mesh{}.validate(p));
  Mesh m;
  m.dx = 0.05;
  EXPECT_THROW(m.validate(p), Error);
  const Mesh u = Mesh::uniform(25, 50, p, 0.01);
  EXPECT_DOUBLE_EQ(u.dx, 0.04);
  EXPECT_DOUBLE_EQ(u.dy, 0.002);
}

}  // namespace
}  // namespace ihtp
