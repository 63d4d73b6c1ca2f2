#include "ihtp/physics.hpp"

#include <cmath>
#include <string>

#include "ihtp/error.hpp"

namespace ihtp {

void PhysicalParams::validate() const {
  auto positive = [](double v, const char* name) {
    require(std::isfinite(v) && v > 0.0, ErrorKind::InvalidArgument,
            std::string("physical parameter '") + name + "' must be finite and positive");
  };
  positive(conductivity, "conductivity");
  positive(density, "density");
  positive(specific_heat, "specific_heat");
  positive(length, "length");
  positive(height, "height");
  positive(mean_velocity, "mean_velocity");
  positive(inlet_temperature, "inlet_temperature");
}

Mesh Mesh::uniform(int nx, int ny, const PhysicalParams& params, double dt) {
  require(nx >= 1 && ny >= 2, ErrorKind::InvalidArgument, "mesh needs nx >= 1 and ny >= 2");
  return Mesh{nx, ny, params.length / nx, params.height / ny, dt};
}

void Mesh::validate(const PhysicalParams& params) const {
  require(nx >= 1 && ny >= 2, ErrorKind::InvalidArgument, "mesh needs nx >= 1 and ny >= 2");
  require(dx > 0 && dy > 0 && dt > 0 && std::isfinite(dt), ErrorKind::InvalidArgument,
          "mesh spacings and time step must be positive");
  require(std::abs(nx * dx - params.length) <= 1e-9 * params.length, ErrorKind::InvalidArgument,
          "mesh nx*dx does not match the domain length");
  require(std::abs(ny * dy - params.height) <= 1e-9 * params.height, ErrorKind::InvalidArgument,
          "mesh ny*dy does not match the domain height");
}

TemperatureField TemperatureField::uniform(const Mesh& mesh, double temperature) {
  return {Eigen::VectorXd::Constant(mesh.cells(), temperature)};
}

double velocity_at(const PhysicalParams& params, double y) {
  require(y >= 0.0 && y <= params.height, ErrorKind::Domain,
          "velocity_at: y=" + std::to_string(y) + " outside [0, h]");
  const double s = y / params.height;
  return 6.0 * params.mean_velocity * s * (1.0 - s);
}

void advance_step_into(const Eigen::Ref<const Eigen::VectorXd>& in, double q, const Mesh& mesh,
                       const PhysicalParams& params, Eigen::Ref<Eigen::VectorXd> out) {
  const int nx = mesh.nx;
  const int ny = mesh.ny;
  require(in.size() == mesh.cells() && out.size() == mesh.cells(), ErrorKind::InvalidArgument,
          "advance_step: field size does not match mesh");
  require(std::isfinite(q), ErrorKind::Numerical, "advance_step: non-finite heat flux");

  const double cap = params.volumetric_heat_capacity();
  const double storage = cap / mesh.dt;
  const double diff = params.conductivity / (mesh.dy * mesh.dy);
  const double wall_source = q / mesh.dy;

  // Per-row coefficients are the same for every column.
  thread_local std::vector<double> advect, diag, pivot, c_prime, d_prime;
  advect.resize(ny);
  diag.resize(ny);
  pivot.resize(ny);
  c_prime.resize(ny);
  d_prime.resize(ny);
  for (int j = 0; j < ny; ++j) {
    advect[j] = cap * velocity_at(params, mesh.y_center(j)) / mesh.dx;
    const double neighbours = (j == 0 || j == ny - 1) ? 1.0 : 2.0;
    diag[j] = storage + advect[j] + neighbours * diff;
  }

  // Forward elimination factors depend only on the matrix, not the right-hand side.
  // Sub/super diagonals are all -diff.
  pivot[0] = diag[0];
  c_prime[0] = -diff / pivot[0];
  for (int j = 1; j < ny; ++j) {
    pivot[j] = diag[j] + diff * c_prime[j - 1];
    // Strict diagonal dominance keeps every pivot positive.
    if (!(pivot[j] > 0.0)) fail(ErrorKind::Internal, "advance_step: tridiagonal pivot breakdown");
    c_prime[j] = -diff / pivot[j];
  }

  for (int i = 0; i < nx; ++i) {
    const double* old_col = in.data() + static_cast<std::ptrdiff_t>(i) * ny;
    const double* up_col = (i == 0) ? nullptr : out.data() + static_cast<std::ptrdiff_t>(i - 1) * ny;
    double* new_col = out.data() + static_cast<std::ptrdiff_t>(i) * ny;
    for (int j = 0; j < ny; ++j) {
      const double upstream = up_col ? up_col[j] : params.inlet_temperature;
      double rhs = storage * old_col[j] + advect[j] * upstream;
      if (j == ny - 1) rhs += wall_source;
      d_prime[j] = (j == 0) ? rhs / pivot[0] : (rhs + diff * d_prime[j - 1]) / pivot[j];
    }
    new_col[ny - 1] = d_prime[ny - 1];
    for (int j = ny - 2; j >= 0; --j) new_col[j] = d_prime[j] - c_prime[j] * new_col[j + 1];
  }
}

TemperatureField advance_step(const TemperatureField& field, double q, const Mesh& mesh,
                              const PhysicalParams& params) {
  require(field.values.allFinite(), ErrorKind::Numerical, "advance_step: non-finite temperature");
  TemperatureField next{Eigen::VectorXd(mesh.cells())};
  advance_step_into(field.values, q, mesh, params, next.values);
  return next;
}

TransientResult run_transient(std::span<const double> flux_samples, const Mesh& mesh,
                              const PhysicalParams& params, std::span<const CellIndex> probes) {
  for (const auto& p : probes)
    require(mesh.contains(p), ErrorKind::InvalidArgument,
            "run_transient: probe (" + std::to_string(p.i) + "," + std::to_string(p.j) +
                ") outside mesh");

  TransientResult result;
  result.probes.assign(probes.size(), std::vector<double>(flux_samples.size()));
  Eigen::VectorXd current = Eigen::VectorXd::Constant(mesh.cells(), params.inlet_temperature);
  Eigen::VectorXd next(mesh.cells());
  for (std::size_t k = 0; k < flux_samples.size(); ++k) {
    advance_step_into(current, flux_samples[k], mesh, params, next);
    current.swap(next);
    for (std::size_t p = 0; p < probes.size(); ++p) result.probes[p][k] = current[mesh.flat(probes[p])];
  }
  result.final_field.values = std::move(current);
  return result;
}

namespace {

int nearest_center(double coord, double spacing, int count) {
  // Candidate centres either side of the coordinate; ties favour the lower index.
  int lo = static_cast<int>(std::floor(coord / spacing - 0.5));
  int best = -1;
  double best_dist = INFINITY;
  for (int c = lo - 1; c <= lo + 2; ++c) {
    if (c < 0 || c >= count) continue;
    const double dist = std::abs(coord - (c + 0.5) * spacing);
    if (dist < best_dist - 1e-12 * spacing) {
      best = c;
      best_dist = dist;
    }
  }
  return best;
}

}  // namespace

CellIndex node_index(double x, double y, const Mesh& mesh, const PhysicalParams& params) {
  const double tol = 1e-12;
  require(x >= -tol && x <= params.length + tol && y >= -tol && y <= params.height + tol,
          ErrorKind::Domain,
          "node_index: point (" + std::to_string(x) + "," + std::to_string(y) + ") outside domain");
  return {nearest_center(x, mesh.dx, mesh.nx), nearest_center(y, mesh.dy, mesh.ny)};
}

double outlet_enthalpy_flux(const TemperatureField& field, const Mesh& mesh,
                            const PhysicalParams& params) {
  double sum = 0.0;
  for (int j = 0; j < mesh.ny; ++j) {
    const double u = velocity_at(params, mesh.y_center(j));
    sum += u * (field.at(mesh, {mesh.nx - 1, j}) - params.inlet_temperature) * mesh.dy;
  }
  return params.volumetric_heat_capacity() * sum;
}

double outlet_bulk_rise(const TemperatureField& field, const Mesh& mesh,
                        const PhysicalParams& params) {
  double flow = 0.0;
  for (int j = 0; j < mesh.ny; ++j) flow += velocity_at(params, mesh.y_center(j)) * mesh.dy;
  return outlet_enthalpy_flux(field, mesh, params) / (params.volumetric_heat_capacity() * flow);
}

}  // namespace ihtp
