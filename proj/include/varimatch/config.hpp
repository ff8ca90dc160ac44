#pragma once

#include "varimatch/kernels.hpp"
#include "varimatch/lbfgs.hpp"

#include <cstdint>

namespace varimatch {

/// Run-wide parameters shared by the CLI subcommands; serialized as the JSON
/// configuration file.
struct RunConfig {
    SpatialKernel spatial;         ///< sigma_rho
    GrassmannKernel grassmann;     ///< gamma preset
    DeformationKernel deformation; ///< sigma_v
    double lambda = 1.0;           ///< fidelity weight
    int steps = 16;                ///< RK4 steps on [0, 1]
    LbfgsConfig optimizer;
    bool reduce_momentum = true;
    std::uint64_t seed = 0;
};

} // namespace varimatch
