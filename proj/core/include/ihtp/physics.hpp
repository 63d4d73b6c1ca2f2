#pragma once

// Finite-volume solver for 2D transient channel convection with a heated top wall:
//
//   rho c_p dT/dt + rho c_p u(y) dT/dx = k d2T/dy2
//   k dT/dy = q(t) at y = h,  dT/dy = 0 at y = 0,  T = T_in at x = 0
//   u(y) = 6 u_m (y/h)(1 - y/h)
//
// Cell-centred mesh, fully implicit Euler, first-order upwind in x and central
// differences in y. With no x-diffusion and u >= 0 the implicit system is lower
// block-triangular in x, so a step is one tridiagonal solve per column.

#include <span>
#include <vector>

#include <Eigen/Core>

namespace ihtp {

struct PhysicalParams {
  double conductivity = 0.243;      // W/(m K)
  double density = 1.29;            // kg/m^3
  double specific_heat = 1005.0;    // J/(kg K)
  double length = 1.0;              // m
  double height = 0.1;              // m
  double mean_velocity = 0.033;     // m/s
  double inlet_temperature = 300.0; // K

  double volumetric_heat_capacity() const { return density * specific_heat; }
  void validate() const;
};

struct CellIndex {
  int i = 0;  // column (x)
  int j = 0;  // row (y)

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

struct Mesh {
  int nx = 25;
  int ny = 50;
  double dx = 0.04;  // m
  double dy = 0.002; // m
  double dt = 0.01;  // s

  /// Uniform mesh that exactly covers the domain described by `params`.
  static Mesh uniform(int nx, int ny, const PhysicalParams& params, double dt);

  int cells() const { return nx * ny; }
  /// Flat storage index: column-by-column, rows contiguous within a column.
  int flat(CellIndex c) const { return c.i * ny + c.j; }
  int flat(int i, int j) const { return i * ny + j; }
  CellIndex cell(int flat_index) const { return {flat_index / ny, flat_index % ny}; }
  bool contains(CellIndex c) const { return c.i >= 0 && c.i < nx && c.j >= 0 && c.j < ny; }
  double x_center(int i) const { return (i + 0.5) * dx; }
  double y_center(int j) const { return (j + 0.5) * dy; }

  void validate(const PhysicalParams& params) const;
};

struct TemperatureField {
  Eigen::VectorXd values;  // K, indexed by Mesh::flat

  static TemperatureField uniform(const Mesh& mesh, double temperature);

  double at(const Mesh& mesh, CellIndex c) const { return values[mesh.flat(c)]; }
  double& at(const Mesh& mesh, CellIndex c) { return values[mesh.flat(c)]; }
};

/// Fully developed inlet profile. Throws ErrorKind::Domain for y outside [0, h].
double velocity_at(const PhysicalParams& params, double y);

/// One implicit step of length mesh.dt under top-wall flux `q` (W/m^2).
TemperatureField advance_step(const TemperatureField& field, double q, const Mesh& mesh,
                              const PhysicalParams& params);

/// Same as advance_step but writes into `out` (which may alias nothing in `in`).
void advance_step_into(const Eigen::Ref<const Eigen::VectorXd>& in, double q, const Mesh& mesh,
                       const PhysicalParams& params, Eigen::Ref<Eigen::VectorXd> out);

struct TransientResult {
  std::vector<std::vector<double>> probes;  // probes[p][k]: probe p after step k
  TemperatureField final_field;
};

/// Chains advance_step from the uniform inlet-temperature field, one step per flux sample.
TransientResult run_transient(std::span<const double> flux_samples, const Mesh& mesh,
                              const PhysicalParams& params, std::span<const CellIndex> probes);

/// Cell whose centre is nearest to (x, y); ties go to the lower index.
CellIndex node_index(double x, double y, const Mesh& mesh, const PhysicalParams& params);

/// Mass-flow-weighted temperature rise over the inlet at the outlet column.
double outlet_bulk_rise(const TemperatureField& field, const Mesh& mesh,
                        const PhysicalParams& params);

/// Heat carried out through the outlet per unit depth, W/m.
double outlet_enthalpy_flux(const TemperatureField& field, const Mesh& mesh,
                            const PhysicalParams& params);

}  // namespace ihtp
