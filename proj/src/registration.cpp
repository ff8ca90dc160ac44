#include "varimatch/registration.hpp"

#include "varimatch/common.hpp"
#include "varimatch/linalg.hpp"

#include <array>
#include <cassert>
#include <cmath>
#include <limits>

namespace varimatch {

double fidelity(int n, int d, int atoms, std::span<const double> q_end,
                const DiscreteVarifold& target, const SpatialKernel& kp,
                const GrassmannKernel& kg, double lambda, std::span<double> grad) {
    if (target.atom_count() == 0) throw ValidationError("fidelity: empty target varifold");
    const double dist = distance_sq_gradient(n, d, atoms, q_end, target, kp, kg, grad);
    for (auto& g : grad) g *= lambda;
    return lambda * std::max(0.0, dist);
}

MomentumParameterization::MomentumParameterization(const DiscreteVarifold& source,
                                                   bool reduced)
    : n_(source.ambient_dim()), d_(source.plane_dim()), atoms_(source.atom_count()),
      reduced_(reduced) {
    if (!reduced_) {
        param_count_ = atoms_ * n_ * (d_ + 1);
        return;
    }
    offset_.assign(static_cast<std::size_t>(atoms_) * d_, 0);
    subdim_.assign(static_cast<std::size_t>(atoms_) * d_, 0);
    param_count_ = atoms_ * n_; // the p^x blocks are unrestricted

    std::vector<double> span_basis; // orthonormalized {u^l, l != k}
    std::vector<double> candidate(n_);
    for (int i = 0; i < atoms_; ++i) {
        for (int k = 0; k < d_; ++k) {
            span_basis.clear();
            for (int l = 0; l < d_; ++l) {
                if (l == k) continue;
                const auto u = source.frame_vector(i, l);
                candidate.assign(u.begin(), u.end());
                const int have = static_cast<int>(span_basis.size()) / n_;
                for (int b = 0; b < have; ++b) {
                    const double proj =
                        la::dot(candidate, std::span<const double>(span_basis)
                                               .subspan(static_cast<std::size_t>(b) * n_, n_));
                    for (int c = 0; c < n_; ++c) candidate[c] -= proj * span_basis[b * n_ + c];
                }
                const double len = la::norm(candidate);
                if (len > 1e-12) {
                    for (double& v : candidate) v /= len;
                    span_basis.insert(span_basis.end(), candidate.begin(), candidate.end());
                }
            }
            // Complement: orthonormal vectors orthogonal to span_basis.
            const int rank = static_cast<int>(span_basis.size()) / n_;
            const int want = n_ - rank;
            offset_[static_cast<std::size_t>(i) * d_ + k] =
                static_cast<int>(basis_.size()) / n_;
            int got = 0;
            for (int axis = 0; axis < n_ && got < want; ++axis) {
                std::fill(candidate.begin(), candidate.end(), 0.0);
                candidate[axis] = 1.0;
                for (int b = 0; b < rank; ++b) {
                    const double proj =
                        la::dot(candidate, std::span<const double>(span_basis)
                                               .subspan(static_cast<std::size_t>(b) * n_, n_));
                    for (int c = 0; c < n_; ++c) candidate[c] -= proj * span_basis[b * n_ + c];
                }
                const int mine = static_cast<int>(basis_.size()) / n_ -
                                 offset_[static_cast<std::size_t>(i) * d_ + k];
                for (int b = 0; b < mine; ++b) {
                    const int idx = offset_[static_cast<std::size_t>(i) * d_ + k] + b;
                    const double proj =
                        la::dot(candidate, std::span<const double>(basis_)
                                               .subspan(static_cast<std::size_t>(idx) * n_, n_));
                    for (int c = 0; c < n_; ++c) candidate[c] -= proj * basis_[idx * n_ + c];
                }
                const double len = la::norm(candidate);
                if (len > 1e-10) {
                    for (double& v : candidate) v /= len;
                    basis_.insert(basis_.end(), candidate.begin(), candidate.end());
                    ++got;
                }
            }
            subdim_[static_cast<std::size_t>(i) * d_ + k] = got;
            param_count_ += got;
        }
    }
}

void MomentumParameterization::to_state(std::span<const double> params,
                                        std::span<double> p) const {
    assert(params.size() == static_cast<std::size_t>(param_count_));
    std::fill(p.begin(), p.end(), 0.0);
    const std::size_t block = static_cast<std::size_t>(n_) * (d_ + 1);
    if (!reduced_) {
        std::copy(params.begin(), params.end(), p.begin());
        return;
    }
    std::size_t cursor = 0;
    for (int i = 0; i < atoms_; ++i) {
        for (int c = 0; c < n_; ++c) p[i * block + c] = params[cursor++];
        for (int k = 0; k < d_; ++k) {
            const int off = offset_[static_cast<std::size_t>(i) * d_ + k];
            const int dim = subdim_[static_cast<std::size_t>(i) * d_ + k];
            auto dst = p.subspan(i * block + static_cast<std::size_t>(k + 1) * n_, n_);
            for (int b = 0; b < dim; ++b) {
                const double coef = params[cursor++];
                for (int c = 0; c < n_; ++c) dst[c] += coef * basis_[(off + b) * n_ + c];
            }
        }
    }
}

void MomentumParameterization::to_params_grad(std::span<const double> state_grad,
                                              std::span<double> params_grad) const {
    assert(params_grad.size() == static_cast<std::size_t>(param_count_));
    const std::size_t block = static_cast<std::size_t>(n_) * (d_ + 1);
    if (!reduced_) {
        std::copy(state_grad.begin(), state_grad.end(), params_grad.begin());
        return;
    }
    std::size_t cursor = 0;
    for (int i = 0; i < atoms_; ++i) {
        for (int c = 0; c < n_; ++c) params_grad[cursor++] = state_grad[i * block + c];
        for (int k = 0; k < d_; ++k) {
            const int off = offset_[static_cast<std::size_t>(i) * d_ + k];
            const int dim = subdim_[static_cast<std::size_t>(i) * d_ + k];
            const auto src =
                state_grad.subspan(i * block + static_cast<std::size_t>(k + 1) * n_, n_);
            for (int b = 0; b < dim; ++b)
                params_grad[cursor++] =
                    la::dot(src, std::span<const double>(basis_)
                                     .subspan(static_cast<std::size_t>(off + b) * n_, n_));
        }
    }
}

void MomentumParameterization::from_state(std::span<const double> p,
                                          std::span<double> params) const {
    // Orthonormal blocks make the least-squares coefficients plain projections,
    // which is the same contraction as the gradient chain rule.
    to_params_grad(p, params);
}

namespace {

void state_axpy(ShootingState& dst, double a, const ShootingState& src) {
    for (std::size_t i = 0; i < dst.q.size(); ++i) dst.q[i] += a * src.q[i];
    for (std::size_t i = 0; i < dst.p.size(); ++i) dst.p[i] += a * src.p[i];
}

// Forward RK4 that records all stage states for the reverse sweep.
struct Tape {
    std::vector<std::array<ShootingState, 4>> stages;
    ShootingState end;
};

Tape record_forward(const ShootingState& s0, int steps, const DeformationKernel& kv) {
    Tape tape;
    tape.stages.resize(steps);
    ShootingState cur = s0;
    const double h = 1.0 / steps;
    for (int m = 0; m < steps; ++m) {
        auto& st = tape.stages[m];
        ShootingState k1 = hamiltonian_rhs(cur, kv);
        ShootingState y2 = cur;
        state_axpy(y2, h / 2.0, k1);
        ShootingState k2 = hamiltonian_rhs(y2, kv);
        ShootingState y3 = cur;
        state_axpy(y3, h / 2.0, k2);
        ShootingState k3 = hamiltonian_rhs(y3, kv);
        ShootingState y4 = cur;
        state_axpy(y4, h, k3);
        ShootingState k4 = hamiltonian_rhs(y4, kv);
        st[0] = cur;
        st[1] = std::move(y2);
        st[2] = std::move(y3);
        st[3] = std::move(y4);
        const double w = h / 6.0;
        state_axpy(cur, w, k1);
        state_axpy(cur, 2.0 * w, k2);
        state_axpy(cur, 2.0 * w, k3);
        state_axpy(cur, w, k4);
        if (!cur.finite())
            throw NumericalError("energy_and_grad: flow became non-finite; momenta too "
                                 "large for sigma_v");
    }
    tape.end = std::move(cur);
    return tape;
}

} // namespace

EnergyBreakdown energy_and_grad(std::span<const double> p0, const DiscreteVarifold& source,
                                const DiscreteVarifold& target, const RunConfig& cfg,
                                std::span<double> grad_p0, double target_norm_sq,
                                ShootingState* end_state) {
    if (source.ambient_dim() != target.ambient_dim() ||
        source.plane_dim() != target.plane_dim())
        throw DimensionMismatchError("energy_and_grad: source/target disagree on (n, d)");
    const ShootingState s0 = make_state(source, p0);
    const DeformationKernel& kv = cfg.deformation;
    const int steps = cfg.steps;
    const double h = 1.0 / steps;

    Tape tape = record_forward(s0, steps, kv);

    // Regularization: conserved reduced Hamiltonian at t = 0.
    EnergyBreakdown out;
    out.reg_term = reduced_hamiltonian(s0, kv);

    // Fidelity and its end-state gradient.
    ShootingState cotangent(s0.n, s0.d, s0.atoms); // dL/d(state); q-part seeded
    {
        std::vector<double> fid_grad(tape.end.q.size());
        const double dist =
            distance_sq_gradient(s0.n, s0.d, s0.atoms, tape.end.q, target, cfg.spatial,
                                 cfg.grassmann, fid_grad, target_norm_sq);
        out.fid_term = cfg.lambda * std::max(0.0, dist);
        for (std::size_t e = 0; e < fid_grad.size(); ++e)
            cotangent.q[e] = cfg.lambda * fid_grad[e];
    }
    out.energy = out.reg_term + out.fid_term;

    // Reverse sweep: w_m = w_{m+1} + sum_r VJP(y_r, kbar_r).
    ShootingState vjp_out, kbar;
    for (int m = steps - 1; m >= 0; --m) {
        const auto& st = tape.stages[m];
        ShootingState wbar = cotangent;

        std::array<ShootingState, 4> kbars;
        // kbar4
        kbar = ShootingState(s0.n, s0.d, s0.atoms);
        state_axpy(kbar, h / 6.0, wbar);
        kbars[3] = kbar;
        rhs_vjp(st[3], kv, kbars[3], vjp_out);
        // kbar3
        kbar = ShootingState(s0.n, s0.d, s0.atoms);
        state_axpy(kbar, h / 3.0, wbar);
        state_axpy(kbar, h, vjp_out);
        kbars[2] = kbar;
        ShootingState vjp3;
        rhs_vjp(st[2], kv, kbars[2], vjp3);
        // kbar2
        kbar = ShootingState(s0.n, s0.d, s0.atoms);
        state_axpy(kbar, h / 3.0, wbar);
        state_axpy(kbar, h / 2.0, vjp3);
        kbars[1] = kbar;
        ShootingState vjp2;
        rhs_vjp(st[1], kv, kbars[1], vjp2);
        // kbar1
        kbar = ShootingState(s0.n, s0.d, s0.atoms);
        state_axpy(kbar, h / 6.0, wbar);
        state_axpy(kbar, h / 2.0, vjp2);
        kbars[0] = kbar;
        ShootingState vjp1;
        rhs_vjp(st[0], kv, kbars[0], vjp1);

        cotangent = wbar;
        state_axpy(cotangent, 1.0, vjp1);
        state_axpy(cotangent, 1.0, vjp2);
        state_axpy(cotangent, 1.0, vjp3);
        state_axpy(cotangent, 1.0, vjp_out);
    }

    // dE/dp0 = grad_p H_r(s0) + fidelity pullback (p block of the cotangent).
    ShootingState rhs0 = hamiltonian_rhs(s0, kv);
    assert(grad_p0.size() == s0.p.size());
    for (std::size_t e = 0; e < grad_p0.size(); ++e)
        grad_p0[e] = rhs0.q[e] + cotangent.p[e];

    if (end_state) *end_state = std::move(tape.end);
    return out;
}

RegistrationReport register_varifolds(const DiscreteVarifold& source,
                                      const DiscreteVarifold& target, const RunConfig& cfg) {
    if (source.atom_count() == 0)
        throw ValidationError("register_varifolds: empty source varifold");
    if (target.atom_count() == 0)
        throw ValidationError("register_varifolds: empty target varifold");
    if (source.ambient_dim() != target.ambient_dim() ||
        source.plane_dim() != target.plane_dim())
        throw DimensionMismatchError("register_varifolds: source/target disagree on (n, d)");
    if (cfg.lambda <= 0.0) throw ValidationError("register_varifolds: lambda must be > 0");
    if (cfg.steps < 1) throw ValidationError("register_varifolds: steps must be >= 1");

    const double target_norm_sq = inner_product(target, target, cfg.spatial, cfg.grassmann);
    const MomentumParameterization param(source, cfg.reduce_momentum);
    const std::size_t state_dim =
        static_cast<std::size_t>(source.atom_count()) * source.ambient_dim() *
        (source.plane_dim() + 1);

    std::vector<double> p_buf(state_dim), pg_buf(state_dim);
    Objective objective = [&](std::span<const double> params,
                              std::span<double> grad) -> double {
        param.to_state(params, p_buf);
        try {
            EnergyBreakdown br =
                energy_and_grad(p_buf, source, target, cfg, pg_buf, target_norm_sq);
            param.to_params_grad(pg_buf, grad);
            return br.energy;
        } catch (const NumericalError&) {
            // overlong trial step blew up the flow; report +inf so the line
            // search backs off
            std::fill(grad.begin(), grad.end(), 0.0);
            return std::numeric_limits<double>::infinity();
        }
    };

    std::vector<double> params0(param.param_count(), 0.0);
    const LbfgsResult opt = lbfgs_minimize(objective, params0, cfg.optimizer);

    RegistrationReport report;
    report.iterations = opt.iterations;
    report.grad_norm = opt.grad_norm;
    report.converged = opt.status == LbfgsStatus::converged;
    report.status = to_string(opt.status);

    report.p0.resize(state_dim);
    param.to_state(opt.x, report.p0);

    const ShootingState s0 = make_state(source, report.p0);
    report.trajectory = rk4_forward(s0, cfg.steps, cfg.deformation);
    report.hamiltonian_drift = report.trajectory.hamiltonian_drift();
    report.reg_term = report.trajectory.hamiltonian.front();

    const ShootingState& end = report.trajectory.states.back();
    report.deformed =
        varifold_from_flat(end.n, end.d, end.atoms, end.q);
    report.fid_term =
        cfg.lambda * distance_sq(report.deformed, target, cfg.spatial, cfg.grassmann);
    report.energy = report.reg_term + report.fid_term;

    // At an optimum the per-atom matrices D^i = <u^k, p^{u_l}> are scalar;
    // report the worst normalized off-diagonal entry at the end state.
    const std::vector<double> grams = gram_matrices(end);
    const int d = end.d;
    double worst = 0.0;
    for (int i = 0; i < end.atoms; ++i) {
        double fro = 0.0;
        for (int e = 0; e < d * d; ++e) {
            const double v = grams[static_cast<std::size_t>(i) * d * d + e];
            fro += v * v;
        }
        fro = std::sqrt(fro);
        for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l) {
                if (k == l) continue;
                const double v =
                    std::abs(grams[(static_cast<std::size_t>(i) * d + k) * d + l]);
                worst = std::max(worst, v / (1.0 + fro));
            }
    }
    report.costate_gram_offdiag = worst;
    return report;
}

} // namespace varimatch
