#pragma once

#include <cstdint>

#include "ihtp/mlp.hpp"
#include "ihtp/surrogate_data.hpp"

namespace ihtp::testing {

/// Untrained 6-10-5 network with a plausible physical standardizer attached.
inline MlpModel random_surrogate(std::uint64_t seed, std::string manifest = "m") {
  MlpModel net = MlpModel::random({kReducedDim, 10, kLocalDim}, seed);
  Eigen::VectorXd in_mean = Eigen::VectorXd::Constant(kReducedDim, 305.0);
  Eigen::VectorXd in_std = Eigen::VectorXd::Constant(kReducedDim, 5.0);
  in_mean[kFlux] = 2500.0;
  in_std[kFlux] = 1000.0;
  net.standardizer = Standardizer{ChannelScaler(reduced_input_names(), in_mean, in_std),
                                  ChannelScaler(reduced_output_names(), Eigen::VectorXd::Constant(kLocalDim, 305.0),
                                                Eigen::VectorXd::Constant(kLocalDim, 5.0))};
  net.manifest_hash = std::move(manifest);
  return net;
}

}  // namespace ihtp::testing
