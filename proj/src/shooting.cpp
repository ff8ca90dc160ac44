#include "varimatch/shooting.hpp"

#include "varimatch/common.hpp"
#include "varimatch/linalg.hpp"
#include "varimatch/parallel.hpp"

#include <array>
#include <cassert>
#include <cmath>

namespace varimatch {

namespace {

double dot_n(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Invariants of one ordered atom pair (i receiver, j source). All the
// Hamiltonian quantities are polynomial in these scalars and the profile
// derivatives, which keeps the right-hand side, H itself and its second
// derivatives in one consistent algebraic family.
struct PairScratch {
    std::vector<double> delta;       // n
    std::vector<double> a, b, q, r;  // d each: a_k = delta.u_i^k, b_l = delta.u_j^l,
                                     // q_l = px_i.pu_j^l, r_k = pu_i^k.px_j
    std::vector<double> c, sm;       // d*d: c_kl = u_i^k.u_j^l, sm_kl = pu_i^k.pu_j^l
    // directional derivatives for the Hessian product
    std::vector<double> xdelta;
    std::vector<double> ad, bd, qd, rd;
    std::vector<double> cd, smd;

    explicit PairScratch(int n, int d)
        : delta(n), a(d), b(d), q(d), r(d), c(static_cast<std::size_t>(d) * d),
          sm(static_cast<std::size_t>(d) * d), xdelta(n), ad(d), bd(d), qd(d), rd(d),
          cd(static_cast<std::size_t>(d) * d), smd(static_cast<std::size_t>(d) * d) {}
};

void load_pair(const ShootingState& s, int i, int j, PairScratch& w, double& s2, double& big_p) {
    const int n = s.n;
    const int d = s.d;
    const auto xi = s.x(i), xj = s.x(j);
    s2 = 0.0;
    for (int cdx = 0; cdx < n; ++cdx) {
        w.delta[cdx] = xi[cdx] - xj[cdx];
        s2 += w.delta[cdx] * w.delta[cdx];
    }
    const auto pxi = s.px(i), pxj = s.px(j);
    big_p = dot_n(pxi, pxj);
    for (int k = 0; k < d; ++k) {
        w.a[k] = dot_n(w.delta, s.u(i, k));
        w.r[k] = dot_n(s.pu(i, k), pxj);
    }
    for (int l = 0; l < d; ++l) {
        w.b[l] = dot_n(w.delta, s.u(j, l));
        w.q[l] = dot_n(pxi, s.pu(j, l));
    }
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
            w.c[k * d + l] = dot_n(s.u(i, k), s.u(j, l));
            w.sm[k * d + l] = dot_n(s.pu(i, k), s.pu(j, l));
        }
}

struct PairAggregates {
    double big_b, big_c, big_w;
};

PairAggregates aggregates(const PairScratch& w, int d) {
    PairAggregates out{0.0, 0.0, 0.0};
    for (int k = 0; k < d; ++k) out.big_b += w.a[k] * w.r[k];
    for (int l = 0; l < d; ++l) out.big_b -= w.b[l] * w.q[l];
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
            out.big_c += w.sm[k * d + l] * w.c[k * d + l];
            out.big_w += w.sm[k * d + l] * w.a[k] * w.b[l];
        }
    return out;
}

} // namespace

bool ShootingState::finite() const {
    for (double v : q)
        if (!std::isfinite(v)) return false;
    for (double v : p)
        if (!std::isfinite(v)) return false;
    return true;
}

ShootingState make_state(const DiscreteVarifold& mu) {
    ShootingState s(mu.ambient_dim(), mu.plane_dim(), mu.atom_count());
    const auto flat = flat_from_varifold(mu);
    s.q = flat;
    return s;
}

ShootingState make_state(const DiscreteVarifold& mu, std::span<const double> p0) {
    ShootingState s = make_state(mu);
    if (p0.size() != s.p.size())
        throw DimensionMismatchError("make_state: costate length does not match the varifold");
    s.p.assign(p0.begin(), p0.end());
    return s;
}

void hamiltonian_rhs(const ShootingState& s, const DeformationKernel& kv, ShootingState& out) {
    const int n = s.n;
    const int d = s.d;
    out = ShootingState(n, d, s.atoms);
    parallel_for(s.atoms, [&](std::size_t ii) {
        const int i = static_cast<int>(ii);
        PairScratch w(n, d);
        auto xdot = out.x(i);
        auto pxdot = out.px(i);
        for (int j = 0; j < s.atoms; ++j) {
            double s2, big_p;
            load_pair(s, i, j, w, s2, big_p);
            const double f0 = kv.profile(0, s2);
            const double f1 = kv.profile(1, s2);
            const double f2 = kv.profile(2, s2);
            const double f3 = kv.profile(3, s2);
            const auto agg = aggregates(w, d);
            const double big_g = f1 * big_p + 2.0 * f2 * (agg.big_b - agg.big_c) -
                                 4.0 * f3 * agg.big_w;

            const auto pxj = s.px(j);
            for (int c = 0; c < n; ++c) xdot[c] += f0 * pxj[c];
            for (int l = 0; l < d; ++l) {
                const auto puj = s.pu(j, l);
                const double coef = -2.0 * f1 * w.b[l];
                for (int c = 0; c < n; ++c) xdot[c] += coef * puj[c];
            }

            for (int k = 0; k < d; ++k) {
                auto udot = out.u(i, k);
                const double ca = 2.0 * f1 * w.a[k];
                for (int c = 0; c < n; ++c) udot[c] += ca * pxj[c];
                for (int l = 0; l < d; ++l) {
                    const auto puj = s.pu(j, l);
                    const double coef =
                        -(4.0 * f2 * w.a[k] * w.b[l] + 2.0 * f1 * w.c[k * d + l]);
                    for (int c = 0; c < n; ++c) udot[c] += coef * puj[c];
                }
            }

            // pxdot -= dh/dx_i
            for (int c = 0; c < n; ++c) pxdot[c] -= 2.0 * big_g * w.delta[c];
            for (int k = 0; k < d; ++k) {
                const auto uik = s.u(i, k);
                double coef = 2.0 * f1 * w.r[k];
                for (int l = 0; l < d; ++l) coef -= 4.0 * f2 * w.sm[k * d + l] * w.b[l];
                for (int c = 0; c < n; ++c) pxdot[c] -= coef * uik[c];
            }
            for (int l = 0; l < d; ++l) {
                const auto ujl = s.u(j, l);
                double coef = -2.0 * f1 * w.q[l];
                for (int k = 0; k < d; ++k) coef -= 4.0 * f2 * w.sm[k * d + l] * w.a[k];
                for (int c = 0; c < n; ++c) pxdot[c] -= coef * ujl[c];
            }

            // pudot_k -= dh/du_i^k
            for (int k = 0; k < d; ++k) {
                auto pudot = out.pu(i, k);
                double cdel = 2.0 * f1 * w.r[k];
                for (int l = 0; l < d; ++l) cdel -= 4.0 * f2 * w.sm[k * d + l] * w.b[l];
                for (int c = 0; c < n; ++c) pudot[c] -= cdel * w.delta[c];
                for (int l = 0; l < d; ++l) {
                    const auto ujl = s.u(j, l);
                    const double coef = 2.0 * f1 * w.sm[k * d + l];
                    for (int c = 0; c < n; ++c) pudot[c] += coef * ujl[c];
                }
            }
        }
    });
}

ShootingState hamiltonian_rhs(const ShootingState& s, const DeformationKernel& kv) {
    ShootingState out;
    hamiltonian_rhs(s, kv, out);
    return out;
}

double reduced_hamiltonian(const ShootingState& s, const DeformationKernel& kv) {
    const int d = s.d;
    std::vector<double> rows(s.atoms, 0.0);
    parallel_for(s.atoms, [&](std::size_t ii) {
        const int i = static_cast<int>(ii);
        PairScratch w(s.n, d);
        double acc = 0.0;
        for (int j = 0; j < s.atoms; ++j) {
            double s2, big_p;
            load_pair(s, i, j, w, s2, big_p);
            const double f0 = kv.profile(0, s2);
            const double f1 = kv.profile(1, s2);
            const double f2 = kv.profile(2, s2);
            const auto agg = aggregates(w, d);
            acc += f0 * big_p + 2.0 * f1 * (agg.big_b - agg.big_c) - 4.0 * f2 * agg.big_w;
        }
        rows[ii] = acc;
    });
    return 0.5 * la::pairwise_sum(rows);
}

void velocity_and_jacobian(const ShootingState& s, const DeformationKernel& kv,
                           std::span<const double> y, int order, std::span<double> v,
                           std::span<double> dv, std::span<double> d2v) {
    const int n = s.n;
    const int d = s.d;
    assert(v.size() == static_cast<std::size_t>(n));
    std::fill(v.begin(), v.end(), 0.0);
    if (order >= 1) std::fill(dv.begin(), dv.end(), 0.0);
    if (order >= 2) std::fill(d2v.begin(), d2v.end(), 0.0);

    std::vector<double> delta(n), b(d);
    for (int j = 0; j < s.atoms; ++j) {
        const auto xj = s.x(j);
        double s2 = 0.0;
        for (int c = 0; c < n; ++c) {
            delta[c] = y[c] - xj[c];
            s2 += delta[c] * delta[c];
        }
        const double f0 = kv.profile(0, s2);
        const double f1 = kv.profile(1, s2);
        const double f2 = order >= 1 ? kv.profile(2, s2) : 0.0;
        const double f3 = order >= 2 ? kv.profile(3, s2) : 0.0;
        for (int l = 0; l < d; ++l) b[l] = dot_n(delta, s.u(j, l));

        const auto pxj = s.px(j);
        for (int a = 0; a < n; ++a) v[a] += f0 * pxj[a];
        for (int l = 0; l < d; ++l) {
            const auto puj = s.pu(j, l);
            const double coef = -2.0 * f1 * b[l];
            for (int a = 0; a < n; ++a) v[a] += coef * puj[a];
        }

        if (order >= 1) {
            for (int a = 0; a < n; ++a) {
                const double pa = 2.0 * f1 * pxj[a];
                for (int c = 0; c < n; ++c) dv[a * n + c] += pa * delta[c];
            }
            for (int l = 0; l < d; ++l) {
                const auto puj = s.pu(j, l);
                const auto ujl = s.u(j, l);
                for (int a = 0; a < n; ++a) {
                    const double pa = puj[a];
                    for (int c = 0; c < n; ++c)
                        dv[a * n + c] -= pa * (4.0 * f2 * b[l] * delta[c] + 2.0 * f1 * ujl[c]);
                }
            }
        }

        if (order >= 2) {
            for (int a = 0; a < n; ++a) {
                const double pa = pxj[a];
                for (int bb = 0; bb < n; ++bb)
                    for (int cc = 0; cc < n; ++cc) {
                        double term = 4.0 * f2 * delta[bb] * delta[cc];
                        if (bb == cc) term += 2.0 * f1;
                        d2v[(a * n + bb) * n + cc] += pa * term;
                    }
            }
            for (int l = 0; l < d; ++l) {
                const auto puj = s.pu(j, l);
                const auto ujl = s.u(j, l);
                for (int a = 0; a < n; ++a) {
                    const double pa = puj[a];
                    for (int bb = 0; bb < n; ++bb)
                        for (int cc = 0; cc < n; ++cc) {
                            double term = 8.0 * f3 * b[l] * delta[bb] * delta[cc] +
                                          4.0 * f2 * (ujl[bb] * delta[cc] + ujl[cc] * delta[bb]);
                            if (bb == cc) term += 4.0 * f2 * b[l];
                            d2v[(a * n + bb) * n + cc] -= pa * term;
                        }
                }
            }
        }
    }
}

double kinetic_energy_via_field(const ShootingState& s, const DeformationKernel& kv) {
    const int n = s.n;
    const int d = s.d;
    std::vector<double> rows(s.atoms, 0.0);
    parallel_for(s.atoms, [&](std::size_t ii) {
        const int i = static_cast<int>(ii);
        std::vector<double> v(n), dv(static_cast<std::size_t>(n) * n);
        velocity_and_jacobian(s, kv, s.x(i), 1, v, dv, {});
        double acc = dot_n(s.px(i), v);
        for (int k = 0; k < d; ++k) {
            const auto uik = s.u(i, k);
            const auto puk = s.pu(i, k);
            for (int a = 0; a < n; ++a) {
                double dv_u = 0.0;
                for (int c = 0; c < n; ++c) dv_u += dv[a * n + c] * uik[c];
                acc += puk[a] * dv_u;
            }
        }
        rows[ii] = acc;
    });
    return 0.5 * la::pairwise_sum(rows);
}

std::vector<double> gram_matrices(const ShootingState& s) {
    const int d = s.d;
    std::vector<double> out(static_cast<std::size_t>(s.atoms) * d * d);
    for (int i = 0; i < s.atoms; ++i)
        for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l)
                out[(static_cast<std::size_t>(i) * d + k) * d + l] =
                    dot_n(s.u(i, k), s.pu(i, l));
    return out;
}

namespace {

void state_axpy(ShootingState& dst, double a, const ShootingState& src) {
    for (std::size_t i = 0; i < dst.q.size(); ++i) dst.q[i] += a * src.q[i];
    for (std::size_t i = 0; i < dst.p.size(); ++i) dst.p[i] += a * src.p[i];
}

// One classical RK4 step of sign * rhs; optionally records the stage states.
void rk4_step(ShootingState& cur, double h, const DeformationKernel& kv, double sign,
              std::array<ShootingState, 4>* stages) {
    ShootingState k1 = hamiltonian_rhs(cur, kv);
    ShootingState y2 = cur;
    state_axpy(y2, sign * h / 2.0, k1);
    ShootingState k2 = hamiltonian_rhs(y2, kv);
    ShootingState y3 = cur;
    state_axpy(y3, sign * h / 2.0, k2);
    ShootingState k3 = hamiltonian_rhs(y3, kv);
    ShootingState y4 = cur;
    state_axpy(y4, sign * h, k3);
    ShootingState k4 = hamiltonian_rhs(y4, kv);

    if (stages) {
        (*stages)[0] = cur;
        (*stages)[1] = std::move(y2);
        (*stages)[2] = std::move(y3);
        (*stages)[3] = std::move(y4);
    }
    const double w = sign * h / 6.0;
    state_axpy(cur, w, k1);
    state_axpy(cur, 2.0 * w, k2);
    state_axpy(cur, 2.0 * w, k3);
    state_axpy(cur, w, k4);
}

} // namespace

double Trajectory::hamiltonian_drift() const {
    if (hamiltonian.empty()) return 0.0;
    const double h0 = hamiltonian.front();
    double drift = 0.0;
    for (double h : hamiltonian) drift = std::max(drift, std::abs(h - h0));
    return drift / std::max(1.0, std::abs(h0));
}

double Trajectory::gram_drift() const {
    if (gram.empty()) return 0.0;
    const auto& g0 = gram.front();
    const int atoms = states.front().atoms;
    const int d = states.front().d;
    const std::size_t block = static_cast<std::size_t>(d) * d;
    double worst = 0.0;
    for (const auto& gt : gram) {
        for (int i = 0; i < atoms; ++i) {
            double diff = 0.0, base = 0.0;
            for (std::size_t e = 0; e < block; ++e) {
                const double delta = gt[i * block + e] - g0[i * block + e];
                diff += delta * delta;
                base += g0[i * block + e] * g0[i * block + e];
            }
            worst = std::max(worst, std::sqrt(diff) / (1.0 + std::sqrt(base)));
        }
    }
    return worst;
}

Trajectory rk4_forward(const ShootingState& s0, int steps, const DeformationKernel& kv) {
    if (steps < 1) throw ValidationError("rk4_forward: steps must be >= 1");
    Trajectory traj;
    traj.steps = steps;
    traj.states.reserve(steps + 1);
    traj.hamiltonian.reserve(steps + 1);
    traj.gram.reserve(steps + 1);

    ShootingState cur = s0;
    traj.states.push_back(cur);
    traj.hamiltonian.push_back(reduced_hamiltonian(cur, kv));
    traj.gram.push_back(gram_matrices(cur));

    const double h = 1.0 / steps;
    for (int m = 0; m < steps; ++m) {
        rk4_step(cur, h, kv, 1.0, nullptr);
        if (!cur.finite())
            throw NumericalError(
                "rk4_forward: state became non-finite at step " + std::to_string(m + 1) +
                "; momenta are too large for the chosen sigma_v (reduce |p| or increase "
                "sigma_v / step count)");
        traj.states.push_back(cur);
        traj.hamiltonian.push_back(reduced_hamiltonian(cur, kv));
        traj.gram.push_back(gram_matrices(cur));
    }
    return traj;
}

ShootingState rk4_backward(const ShootingState& end, int steps, const DeformationKernel& kv) {
    ShootingState cur = end;
    const double h = 1.0 / steps;
    for (int m = 0; m < steps; ++m) {
        rk4_step(cur, h, kv, -1.0, nullptr);
        if (!cur.finite())
            throw NumericalError("rk4_backward: state became non-finite");
    }
    return cur;
}

namespace {

// ydot = v(y), wdot_k = dv(y) w_k for one passive atom, against the control
// state `ctrl`. Mirrors the accumulation order of the forward right-hand side
// so control atoms transported as passives retrace their own trajectory.
void passive_rhs(const ShootingState& ctrl, const DeformationKernel& kv,
                 std::span<const double> atom, std::span<double> out) {
    const int n = ctrl.n;
    const int d = ctrl.d;
    std::fill(out.begin(), out.end(), 0.0);
    const auto y = atom.first(n);
    std::vector<double> delta(n), b(d), aw(d);
    for (int j = 0; j < ctrl.atoms; ++j) {
        const auto xj = ctrl.x(j);
        double s2 = 0.0;
        for (int c = 0; c < n; ++c) {
            delta[c] = y[c] - xj[c];
            s2 += delta[c] * delta[c];
        }
        const double f0 = kv.profile(0, s2);
        const double f1 = kv.profile(1, s2);
        const double f2 = kv.profile(2, s2);
        for (int l = 0; l < d; ++l) b[l] = dot_n(delta, ctrl.u(j, l));
        for (int k = 0; k < d; ++k)
            aw[k] = dot_n(delta, atom.subspan(static_cast<std::size_t>(n) * (k + 1), n));

        const auto pxj = ctrl.px(j);
        auto ydot = out.first(n);
        for (int c = 0; c < n; ++c) ydot[c] += f0 * pxj[c];
        for (int l = 0; l < d; ++l) {
            const auto puj = ctrl.pu(j, l);
            const double coef = -2.0 * f1 * b[l];
            for (int c = 0; c < n; ++c) ydot[c] += coef * puj[c];
        }
        for (int k = 0; k < d; ++k) {
            auto wdot = out.subspan(static_cast<std::size_t>(n) * (k + 1), n);
            const auto wk = atom.subspan(static_cast<std::size_t>(n) * (k + 1), n);
            const double ca = 2.0 * f1 * aw[k];
            for (int c = 0; c < n; ++c) wdot[c] += ca * pxj[c];
            for (int l = 0; l < d; ++l) {
                const auto puj = ctrl.pu(j, l);
                const double coef =
                    -(4.0 * f2 * aw[k] * b[l] + 2.0 * f1 * dot_n(ctrl.u(j, l), wk));
                for (int c = 0; c < n; ++c) wdot[c] += coef * puj[c];
            }
        }
    }
}

} // namespace

DiscreteVarifold transport_varifold(const Trajectory& traj, const DiscreteVarifold& mu,
                                    const DeformationKernel& kv) {
    if (traj.states.empty()) throw ValidationError("transport_varifold: empty trajectory");
    const ShootingState& front = traj.states.front();
    if (mu.ambient_dim() != front.n || mu.plane_dim() != front.d)
        throw DimensionMismatchError("transport_varifold: varifold disagrees with trajectory");

    const int n = front.n;
    const int d = front.d;
    const std::size_t block = static_cast<std::size_t>(n) * (d + 1);
    std::vector<double> z = flat_from_varifold(mu);
    const int count = mu.atom_count();
    const double h = traj.dt();

    std::vector<double> l1(z.size()), l2(z.size()), l3(z.size()), l4(z.size()),
        ztmp(z.size());
    for (int m = 0; m < traj.steps; ++m) {
        ShootingState cur = traj.states[m];
        std::array<ShootingState, 4> stages;
        rk4_step(cur, h, kv, 1.0, &stages);

        auto stage_eval = [&](const ShootingState& ctrl, const std::vector<double>& zin,
                              std::vector<double>& lout) {
            parallel_for(count, [&](std::size_t i) {
                passive_rhs(ctrl, kv,
                            std::span<const double>(zin).subspan(i * block, block),
                            std::span<double>(lout).subspan(i * block, block));
            });
        };

        stage_eval(stages[0], z, l1);
        for (std::size_t e = 0; e < z.size(); ++e) ztmp[e] = z[e] + 0.5 * h * l1[e];
        stage_eval(stages[1], ztmp, l2);
        for (std::size_t e = 0; e < z.size(); ++e) ztmp[e] = z[e] + 0.5 * h * l2[e];
        stage_eval(stages[2], ztmp, l3);
        for (std::size_t e = 0; e < z.size(); ++e) ztmp[e] = z[e] + h * l3[e];
        stage_eval(stages[3], ztmp, l4);
        for (std::size_t e = 0; e < z.size(); ++e)
            z[e] += h / 6.0 * (l1[e] + 2.0 * (l2[e] + l3[e]) + l4[e]);
        for (double v : z)
            if (!std::isfinite(v))
                throw NumericalError("transport_varifold: passive state became non-finite");
    }
    return varifold_from_flat(n, d, count, z);
}

void hamiltonian_hvp(const ShootingState& s, const DeformationKernel& kv,
                     const ShootingState& eta, ShootingState& out) {
    const int n = s.n;
    const int d = s.d;
    assert(eta.q.size() == s.q.size() && eta.p.size() == s.p.size());
    out = ShootingState(n, d, s.atoms);

    parallel_for(s.atoms, [&](std::size_t ii) {
        const int i = static_cast<int>(ii);
        PairScratch w(n, d);
        auto hx = out.x(i);
        auto hpx = out.px(i);
        for (int j = 0; j < s.atoms; ++j) {
            double s2, big_p;
            load_pair(s, i, j, w, s2, big_p);
            const double f0 = kv.profile(0, s2);
            const double f1 = kv.profile(1, s2);
            const double f2 = kv.profile(2, s2);
            const double f3 = kv.profile(3, s2);
            const double f4 = kv.profile(4, s2);

            // Directional derivatives of the invariants along eta.
            const auto exi = eta.x(i), exj = eta.x(j);
            const auto pxi = s.px(i), pxj = s.px(j);
            const auto epxi = eta.px(i), epxj = eta.px(j);
            double sdot = 0.0;
            for (int c = 0; c < n; ++c) {
                w.xdelta[c] = exi[c] - exj[c];
                sdot += 2.0 * w.delta[c] * w.xdelta[c];
            }
            const double pdot = dot_n(epxi, pxj) + dot_n(pxi, epxj);
            for (int k = 0; k < d; ++k) {
                w.ad[k] = dot_n(w.xdelta, s.u(i, k)) + dot_n(w.delta, eta.u(i, k));
                w.rd[k] = dot_n(eta.pu(i, k), pxj) + dot_n(s.pu(i, k), epxj);
            }
            for (int l = 0; l < d; ++l) {
                w.bd[l] = dot_n(w.xdelta, s.u(j, l)) + dot_n(w.delta, eta.u(j, l));
                w.qd[l] = dot_n(epxi, s.pu(j, l)) + dot_n(pxi, eta.pu(j, l));
            }
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) {
                    w.cd[k * d + l] =
                        dot_n(eta.u(i, k), s.u(j, l)) + dot_n(s.u(i, k), eta.u(j, l));
                    w.smd[k * d + l] =
                        dot_n(eta.pu(i, k), s.pu(j, l)) + dot_n(s.pu(i, k), eta.pu(j, l));
                }

            const auto agg = aggregates(w, d);
            double bdot = 0.0, cdot = 0.0, wdot = 0.0;
            for (int k = 0; k < d; ++k) bdot += w.ad[k] * w.r[k] + w.a[k] * w.rd[k];
            for (int l = 0; l < d; ++l) bdot -= w.bd[l] * w.q[l] + w.b[l] * w.qd[l];
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) {
                    const int e = k * d + l;
                    cdot += w.smd[e] * w.c[e] + w.sm[e] * w.cd[e];
                    wdot += w.smd[e] * w.a[k] * w.b[l] +
                            w.sm[e] * (w.ad[k] * w.b[l] + w.a[k] * w.bd[l]);
                }

            const double big_g = f1 * big_p + 2.0 * f2 * (agg.big_b - agg.big_c) -
                                 4.0 * f3 * agg.big_w;
            const double gdot = (f2 * big_p + 2.0 * f3 * (agg.big_b - agg.big_c) -
                                 4.0 * f4 * agg.big_w) *
                                    sdot +
                                f1 * pdot + 2.0 * f2 * (bdot - cdot) - 4.0 * f3 * wdot;

            // x row
            for (int c = 0; c < n; ++c)
                hx[c] += 2.0 * gdot * w.delta[c] + 2.0 * big_g * w.xdelta[c];
            for (int k = 0; k < d; ++k) {
                const auto uik = s.u(i, k);
                const auto euik = eta.u(i, k);
                double cu = 2.0 * f2 * sdot * w.r[k] + 2.0 * f1 * w.rd[k];
                double ce = 2.0 * f1 * w.r[k];
                for (int l = 0; l < d; ++l) {
                    const int e = k * d + l;
                    cu += -4.0 * f3 * sdot * w.sm[e] * w.b[l] -
                          4.0 * f2 * (w.smd[e] * w.b[l] + w.sm[e] * w.bd[l]);
                    ce += -4.0 * f2 * w.sm[e] * w.b[l];
                }
                for (int c = 0; c < n; ++c) hx[c] += cu * uik[c] + ce * euik[c];
            }
            for (int l = 0; l < d; ++l) {
                const auto ujl = s.u(j, l);
                const auto eujl = eta.u(j, l);
                double cu = -2.0 * f2 * sdot * w.q[l] - 2.0 * f1 * w.qd[l];
                double ce = -2.0 * f1 * w.q[l];
                for (int k = 0; k < d; ++k) {
                    const int e = k * d + l;
                    cu += -4.0 * f3 * sdot * w.sm[e] * w.a[k] -
                          4.0 * f2 * (w.smd[e] * w.a[k] + w.sm[e] * w.ad[k]);
                    ce += -4.0 * f2 * w.sm[e] * w.a[k];
                }
                for (int c = 0; c < n; ++c) hx[c] += cu * ujl[c] + ce * eujl[c];
            }

            // u rows
            for (int k = 0; k < d; ++k) {
                auto hu = out.u(i, k);
                double cdel = 2.0 * (f2 * sdot * w.r[k] + f1 * w.rd[k]);
                double cxid = 2.0 * f1 * w.r[k];
                for (int l = 0; l < d; ++l) {
                    const int e = k * d + l;
                    cdel -= w.smd[e] * 4.0 * f2 * w.b[l] +
                            w.sm[e] * 4.0 * (f3 * sdot * w.b[l] + f2 * w.bd[l]);
                    cxid -= w.sm[e] * 4.0 * f2 * w.b[l];
                }
                for (int c = 0; c < n; ++c)
                    hu[c] += cdel * w.delta[c] + cxid * w.xdelta[c];
                for (int l = 0; l < d; ++l) {
                    const int e = k * d + l;
                    const auto ujl = s.u(j, l);
                    const auto eujl = eta.u(j, l);
                    const double cuj = -(w.smd[e] * 2.0 * f1 + w.sm[e] * 2.0 * f2 * sdot);
                    const double ceu = -w.sm[e] * 2.0 * f1;
                    for (int c = 0; c < n; ++c) hu[c] += cuj * ujl[c] + ceu * eujl[c];
                }
            }

            // px row
            for (int c = 0; c < n; ++c)
                hpx[c] += f1 * sdot * pxj[c] + f0 * epxj[c];
            for (int l = 0; l < d; ++l) {
                const auto puj = s.pu(j, l);
                const auto epuj = eta.pu(j, l);
                const double cp = -2.0 * (f2 * sdot * w.b[l] + f1 * w.bd[l]);
                const double cep = -2.0 * f1 * w.b[l];
                for (int c = 0; c < n; ++c) hpx[c] += cp * puj[c] + cep * epuj[c];
            }

            // pu rows
            for (int k = 0; k < d; ++k) {
                auto hpu = out.pu(i, k);
                const double cpx = 2.0 * (f2 * sdot * w.a[k] + f1 * w.ad[k]);
                const double cepx = 2.0 * f1 * w.a[k];
                for (int c = 0; c < n; ++c) hpu[c] += cpx * pxj[c] + cepx * epxj[c];
                for (int l = 0; l < d; ++l) {
                    const int e = k * d + l;
                    const auto puj = s.pu(j, l);
                    const auto epuj = eta.pu(j, l);
                    const double cp =
                        -(4.0 * (f3 * sdot * w.a[k] * w.b[l] +
                                 f2 * (w.ad[k] * w.b[l] + w.a[k] * w.bd[l])) +
                          2.0 * (f2 * sdot * w.c[e] + f1 * w.cd[e]));
                    const double cep = -(4.0 * f2 * w.a[k] * w.b[l] + 2.0 * f1 * w.c[e]);
                    for (int c = 0; c < n; ++c) hpu[c] += cp * puj[c] + cep * epuj[c];
                }
            }
        }
    });
}

void rhs_vjp(const ShootingState& s, const DeformationKernel& kv, const ShootingState& w,
             ShootingState& out) {
    ShootingState eta(s.n, s.d, s.atoms);
    for (std::size_t e = 0; e < eta.q.size(); ++e) eta.q[e] = -w.p[e];
    for (std::size_t e = 0; e < eta.p.size(); ++e) eta.p[e] = w.q[e];
    hamiltonian_hvp(s, kv, eta, out);
}

} // namespace varimatch
