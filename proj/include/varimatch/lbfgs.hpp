#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace varimatch {

/// Componentwise bounds; entries may be +/-infinity for free components.
struct Bounds {
    std::vector<double> lo;
    std::vector<double> hi;
};

struct LbfgsConfig {
    int memory = 10;
    int max_iters = 500;
    double grad_tol = 1e-8; ///< relative: stop when |g| <= grad_tol * max(1, |f|)
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    std::optional<Bounds> projection; ///< iterates are clamped after each step
};

enum class LbfgsStatus {
    converged,          ///< gradient criterion met
    max_iterations,     ///< iteration cap hit
    line_search_failed, ///< no strong-Wolfe step found; last iterate returned
    stalled,            ///< projection blocked all progress
};

const char* to_string(LbfgsStatus status);

struct LbfgsResult {
    std::vector<double> x;
    double f = 0.0;
    double grad_norm = 0.0; ///< projected-gradient norm when bounds are active
    int iterations = 0;
    LbfgsStatus status = LbfgsStatus::converged;
    std::vector<double> f_history; ///< objective at x0 and after each accepted step
};

/// Objective callable: writes the gradient into `grad` and returns the value.
using Objective = std::function<double(std::span<const double>, std::span<double>)>;

/// Limited-memory BFGS with two-loop recursion, s'y/y'y initial scaling and a
/// cubic-interpolating strong-Wolfe line search. With `projection` set, the
/// post-line-search iterate is clamped onto the box and curvature pairs
/// failing the positivity condition are skipped. Deterministic for fixed
/// inputs.
LbfgsResult lbfgs_minimize(const Objective& f, std::span<const double> x0,
                           const LbfgsConfig& cfg);

} // namespace varimatch
