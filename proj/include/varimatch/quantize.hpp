#pragma once

#include "varimatch/lbfgs.hpp"
#include "varimatch/varifold.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace varimatch {

/// Axis-aligned box in R^n.
struct QuantizeBox {
    std::vector<double> lo, hi;
};

enum class BoxMode { none, automatic, fixed };

struct QuantizeConfig {
    int target_count = 1; ///< N, the Dirac budget
    int restarts = 5;
    BoxMode box_mode = BoxMode::none;
    QuantizeBox box; ///< used when box_mode == fixed
    std::uint64_t seed = 0;
    LbfgsConfig optimizer;
    /// Optional nested warm start: atoms of a previous (smaller-N) solution,
    /// used as two extra restart initializations (verbatim-plus-dead-atom and
    /// heaviest-atom split). Enables the monotone error curves.
    std::optional<DiscreteVarifold> warm_start;
};

struct QuantizeReport {
    DiscreteVarifold result;       ///< at most N atoms with positive weight
    double objective = 0.0;        ///< |mu_N - mu*|^2 at the best restart
    double rel_error = 0.0;        ///< |mu_N - mu*| / |mu*|
    double stationarity_gap = 0.0; ///< |<mu_N - mu*, mu_N>| / |mu*|^2
    double norm_ratio = 0.0;       ///< |mu_N| / |mu*|
    int best_restart = -1;
    std::vector<int> iterations; ///< optimizer iterations per restart
};

/// Objective |mu^q - mu*|^2 over the flat variable vector q of N atoms
/// (positions and frame vectors) with its exact gradient.
double quantize_objective_and_grad(int n, int d, int atoms, std::span<const double> q,
                                   const DiscreteVarifold& target, const SpatialKernel& kp,
                                   const GrassmannKernel& kg, std::span<double> grad);

/// Best-of-restarts projection of `target` onto the cone of at most N Diracs
/// under the kernel metric, optionally box-constrained on positions.
/// Requires a nonnegative Grassmann kernel (binet or oriented_gaussian);
/// the current-like linear kernel is rejected.
QuantizeReport quantize(const DiscreteVarifold& target, const QuantizeConfig& cfg,
                        const SpatialKernel& kp, const GrassmannKernel& kg);

/// Keeps `count` uniformly chosen atoms and rescales their weights so the
/// total mass is preserved exactly. The comparison baseline for quantization.
DiscreteVarifold subsample_baseline(const DiscreteVarifold& target, int count,
                                    std::uint64_t seed);

} // namespace varimatch
