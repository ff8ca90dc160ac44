#pragma once

#include "varimatch/kernels.hpp"
#include "varimatch/varifold.hpp"

#include <span>
#include <vector>

namespace varimatch {

/// State and costate of the reduced Hamiltonian system. Per atom, q holds the
/// position followed by the d frame vectors; p mirrors that layout with the
/// position costate followed by the frame-vector costates.
struct ShootingState {
    int n = 0, d = 0, atoms = 0;
    std::vector<double> q, p;

    ShootingState() = default;
    ShootingState(int n_, int d_, int atoms_)
        : n(n_), d(d_), atoms(atoms_),
          q(static_cast<std::size_t>(atoms_) * n_ * (d_ + 1), 0.0),
          p(static_cast<std::size_t>(atoms_) * n_ * (d_ + 1), 0.0) {}

    std::size_t atom_block() const { return static_cast<std::size_t>(n) * (d + 1); }
    std::size_t dim() const { return static_cast<std::size_t>(atoms) * atom_block(); }

    std::span<const double> x(int i) const {
        return std::span<const double>(q).subspan(i * atom_block(), n);
    }
    std::span<const double> u(int i, int k) const {
        return std::span<const double>(q).subspan(i * atom_block() + (k + 1) * n, n);
    }
    std::span<const double> px(int i) const {
        return std::span<const double>(p).subspan(i * atom_block(), n);
    }
    std::span<const double> pu(int i, int k) const {
        return std::span<const double>(p).subspan(i * atom_block() + (k + 1) * n, n);
    }
    std::span<double> x(int i) { return std::span<double>(q).subspan(i * atom_block(), n); }
    std::span<double> u(int i, int k) {
        return std::span<double>(q).subspan(i * atom_block() + (k + 1) * n, n);
    }
    std::span<double> px(int i) { return std::span<double>(p).subspan(i * atom_block(), n); }
    std::span<double> pu(int i, int k) {
        return std::span<double>(p).subspan(i * atom_block() + (k + 1) * n, n);
    }

    bool finite() const;
};

/// Builds the t=0 state from a varifold (q from atoms, p given or zero).
ShootingState make_state(const DiscreteVarifold& mu);
ShootingState make_state(const DiscreteVarifold& mu, std::span<const double> p0);

/// Time-sampled flow with conserved-quantity diagnostics.
struct Trajectory {
    int steps = 0;
    std::vector<ShootingState> states;     ///< steps + 1 entries, t_k = k / steps
    std::vector<double> hamiltonian;       ///< H_r at each sample
    std::vector<std::vector<double>> gram; ///< per sample: atoms * d * d matrices D^i

    double dt() const { return 1.0 / steps; }
    /// max_k |H(t_k) - H(0)| / max(1, |H(0)|)
    double hamiltonian_drift() const;
    /// max_{k,i} |D^i(t_k) - D^i(0)|_F / (1 + |D^i(0)|_F)
    double gram_drift() const;
};

/// Velocity field of the optimal control (kernel sum over atoms of p^x terms
/// plus first-derivative terms from the p^u costates), with spatial
/// derivatives up to `order` (0, 1 or 2) at probe point y.
/// v: n entries; dv: n*n row-major (dv[a*n+b] = d v_a / d y_b), may be empty
/// when order < 1; d2v: n*n*n (d2v[(a*n+b)*n+c]), may be empty when order < 2.
void velocity_and_jacobian(const ShootingState& s, const DeformationKernel& kv,
                           std::span<const double> y, int order, std::span<double> v,
                           std::span<double> dv, std::span<double> d2v);

/// Right-hand side of the reduced Hamiltonian system:
/// xdot = v(x), udot = dv(x)u, pxdot = -dv^T px - sum_k d2v(., u_k)^T pu_k,
/// pudot_k = -dv^T pu_k, with v the self-consistent field above.
void hamiltonian_rhs(const ShootingState& s, const DeformationKernel& kv, ShootingState& out);
ShootingState hamiltonian_rhs(const ShootingState& s, const DeformationKernel& kv);

/// Reduced Hamiltonian H_r = (1/2) sum_i [px_i . v(x_i) + sum_k pu_ik . dv(x_i) u_ik];
/// equals half the squared RKHS norm of the velocity field. Conserved along flows.
double reduced_hamiltonian(const ShootingState& s, const DeformationKernel& kv);

/// Same quantity recomputed through pointwise field probes instead of the
/// pairwise sum; used as an independent cross-check of reg energies.
double kinetic_energy_via_field(const ShootingState& s, const DeformationKernel& kv);

/// Per-atom matrices D^i[k][l] = <u_i^(k), p_i^(u_l)>, flattened atoms*d*d.
/// Constant along exact trajectories.
std::vector<double> gram_matrices(const ShootingState& s);

/// Classical RK4 with step 1/steps. Throws NumericalError if the state leaves
/// the finite range (too-large momenta or too-small sigma_v).
Trajectory rk4_forward(const ShootingState& s0, int steps, const DeformationKernel& kv);

/// RK4 on the negated right-hand side (time reversal); test/diagnostic use.
ShootingState rk4_backward(const ShootingState& end, int steps, const DeformationKernel& kv);

/// Carries a passive varifold through the trajectory's time-dependent field.
/// Stage fields are re-evaluated at the control system's own RK4 stage states,
/// so transporting the trajectory's source atoms reproduces its end state.
DiscreteVarifold transport_varifold(const Trajectory& traj, const DiscreteVarifold& mu,
                                    const DeformationKernel& kv);

/// Hessian-of-H directional derivative: out = (d^2 H) eta. The right-hand
/// side's vector-Jacobian product is this with (eta_q, eta_p) = (-w_p, w_q),
/// which is what the reverse RK4 sweep consumes.
void hamiltonian_hvp(const ShootingState& s, const DeformationKernel& kv,
                     const ShootingState& eta, ShootingState& out);

/// out = (dF/ds)^T w for F the Hamiltonian right-hand side.
void rhs_vjp(const ShootingState& s, const DeformationKernel& kv, const ShootingState& w,
             ShootingState& out);

} // namespace varimatch
