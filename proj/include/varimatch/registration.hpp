#pragma once

#include "varimatch/config.hpp"
#include "varimatch/shooting.hpp"
#include "varimatch/varifold.hpp"

#include <span>
#include <string>
#include <vector>

namespace varimatch {

/// lambda * |mu^q - target|^2 and its exact gradient with respect to every
/// end-state position and frame component. `grad` is overwritten.
double fidelity(int n, int d, int atoms, std::span<const double> q_end,
                const DiscreteVarifold& target, const SpatialKernel& kp,
                const GrassmannKernel& kg, double lambda, std::span<double> grad);

/// Unreduced momenta, or momenta restricted per atom and frame index to the
/// orthogonal complement of the other frame vectors (the affine subspaces the
/// optimal costates live in). Parameters map linearly onto the state costate.
class MomentumParameterization {
public:
    MomentumParameterization(const DiscreteVarifold& source, bool reduced);

    int param_count() const { return param_count_; }
    /// p (state layout, length atoms*n*(d+1)) from parameters.
    void to_state(std::span<const double> params, std::span<double> p) const;
    /// Chain rule: params_grad = B^T state_grad.
    void to_params_grad(std::span<const double> state_grad, std::span<double> params_grad) const;
    /// Least-squares representation of a state costate (orthonormal blocks).
    void from_state(std::span<const double> p, std::span<double> params) const;

private:
    int n_, d_, atoms_;
    bool reduced_;
    int param_count_ = 0;
    // Reduced case: per (atom, k) an orthonormal basis of the allowed subspace.
    std::vector<double> basis_;  // concatenated n-vectors
    std::vector<int> offset_;    // (i*d + k) -> first basis vector index
    std::vector<int> subdim_;    // (i*d + k) -> subspace dimension
};

/// E(p0) = H_r(q0, p0) + lambda |mu^{q(1)} - mu_tar|^2 under the RK4 flow, and
/// the exact gradient of that discrete objective with respect to p0 (state
/// layout): reverse sweep through the recorded stages with analytic
/// vector-Jacobian products. Also returns the end state when requested.
struct EnergyBreakdown {
    double energy = 0.0;
    double reg_term = 0.0;
    double fid_term = 0.0;
};

EnergyBreakdown energy_and_grad(std::span<const double> p0, const DiscreteVarifold& source,
                                const DiscreteVarifold& target, const RunConfig& cfg,
                                std::span<double> grad_p0, double target_norm_sq,
                                ShootingState* end_state = nullptr);

struct RegistrationReport {
    std::vector<double> p0; ///< optimal initial costate, state layout
    double energy = 0.0;
    double reg_term = 0.0; ///< H_r(q0, p0)
    double fid_term = 0.0; ///< lambda * |mu(1) - mu_tar|^2
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string status;
    double hamiltonian_drift = 0.0;   ///< integration-quality diagnostic
    double costate_gram_offdiag = 0.0;   ///< max |D^i(1)_kl| / (1+|D^i|), k != l
    Trajectory trajectory;
    DiscreteVarifold deformed;
};

/// Geodesic shooting: minimizes E over the initial costate from p0 = 0 with
/// L-BFGS, optionally in the reduced momentum parameterization.
RegistrationReport register_varifolds(const DiscreteVarifold& source,
                                      const DiscreteVarifold& target, const RunConfig& cfg);

} // namespace varimatch
