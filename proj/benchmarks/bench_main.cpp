#include <benchmark/benchmark.h>

#include <Eigen/Core>

#include "ihtp/ekf_rts.hpp"
#include "ihtp/inversion.hpp"
#include "ihtp/mlp.hpp"
#include "ihtp/physics.hpp"
#include "ihtp/transfer_models.hpp"

namespace {

using namespace ihtp;

void BM_AdvanceStep(benchmark::State& state) {
  const PhysicalParams params;
  const Mesh mesh;
  Eigen::VectorXd cur = Eigen::VectorXd::Constant(mesh.cells(), params.inlet_temperature);
  Eigen::VectorXd next(mesh.cells());
  for (auto _ : state) {
    advance_step_into(cur, 2500.0, mesh, params, next);
    cur.swap(next);
    benchmark::DoNotOptimize(cur.data());
  }
}
BENCHMARK(BM_AdvanceStep);

// Untrained networks cost the same to evaluate as trained ones.
MlpModel random_surrogate(std::uint64_t seed) {
  MlpModel net = MlpModel::random({kReducedDim, 10, kLocalDim}, seed);
  Eigen::VectorXd in_mean = Eigen::VectorXd::Constant(kReducedDim, 305.0);
  Eigen::VectorXd in_std = Eigen::VectorXd::Constant(kReducedDim, 5.0);
  in_mean[kFlux] = 2500.0;
  in_std[kFlux] = 1000.0;
  net.standardizer = Standardizer{ChannelScaler(reduced_input_names(), in_mean, in_std),
                                  ChannelScaler(reduced_output_names(), Eigen::VectorXd::Constant(kLocalDim, 305.0),
                                                Eigen::VectorXd::Constant(kLocalDim, 5.0))};
  return net;
}

ReducedAnnModel random_reduced_model() { return ReducedAnnModel(random_surrogate(1), random_surrogate(2)); }

void BM_AnnEksStep(benchmark::State& state) {
  const PhysicalParams params;
  const ReducedAnnModel model = random_reduced_model();
  const FilterTuning tuning;
  SmootherOptions opts;
  opts.lag = static_cast<std::size_t>(state.range(0));
  FixedLagSmoother<ReducedAnnModel> smoother(model, filter_noise(kReducedDim, tuning, 5.0),
                                             reduced_prior(params, tuning), opts);
  double z = params.inlet_temperature;
  for (auto _ : state) {
    auto e = smoother.push(z);
    benchmark::DoNotOptimize(e);
    z += 1e-3;
  }
}
BENCHMARK(BM_AnnEksStep)->Arg(0)->Arg(6)->Arg(18)->Arg(30);

void BM_MlpWeightJacobian(benchmark::State& state) {
  const MlpModel net = MlpModel::random({kReducedDim, 10, kLocalDim}, 3);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(kReducedDim, -1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(jacobian_wrt_weights(net, x));
}
BENCHMARK(BM_MlpWeightJacobian);

void BM_ReducedJacobian(benchmark::State& state) {
  const ReducedAnnModel model = random_reduced_model();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(kReducedDim, 305.0);
  x[kFlux] = 2500.0;
  for (auto _ : state) benchmark::DoNotOptimize(model.jacobian(x));
}
BENCHMARK(BM_ReducedJacobian);

void BM_CfdJacobian(benchmark::State& state) {
  const PhysicalParams params;
  const Mesh mesh;
  const CfdTransferModel model(mesh, params, node_index(0.82, 0.089, mesh, params));
  const Eigen::VectorXd x = model.initial_state(2500.0);
  for (auto _ : state) benchmark::DoNotOptimize(model.jacobian(x));
}
BENCHMARK(BM_CfdJacobian)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
