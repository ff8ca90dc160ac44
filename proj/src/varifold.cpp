#include "varimatch/varifold.hpp"

#include "varimatch/common.hpp"
#include "varimatch/linalg.hpp"
#include "varimatch/parallel.hpp"

#include <cassert>
#include <cmath>
#include <cstring>

namespace varimatch {

void DiscreteVarifold::add_atom(std::span<const double> x, std::span<const double> frame) {
    if (x.size() != static_cast<std::size_t>(n_) ||
        frame.size() != static_cast<std::size_t>(n_) * d_)
        throw DimensionMismatchError("add_atom: component counts do not match (n, d)");
    x_.insert(x_.end(), x.begin(), x.end());
    u_.insert(u_.end(), frame.begin(), frame.end());
    ++count_;
}

OrientedFrameAtom DiscreteVarifold::atom(int i) const {
    OrientedFrameAtom a;
    const auto p = position(i);
    const auto f = frame(i);
    a.x.assign(p.begin(), p.end());
    a.frame.assign(f.begin(), f.end());
    return a;
}

namespace {

void require_compatible(const DiscreteVarifold& mu, const DiscreteVarifold& nu) {
    if (mu.ambient_dim() != nu.ambient_dim() || mu.plane_dim() != nu.plane_dim())
        throw DimensionMismatchError("varifolds disagree on (n, d): (" +
                                     std::to_string(mu.ambient_dim()) + ", " +
                                     std::to_string(mu.plane_dim()) + ") vs (" +
                                     std::to_string(nu.ambient_dim()) + ", " +
                                     std::to_string(nu.plane_dim()) + ")");
}

struct AtomCache {
    std::vector<double> weight;  // per atom; 0 marks a skipped atom
    int live = 0;

    explicit AtomCache(const DiscreteVarifold& mu) {
        const int count = mu.atom_count();
        weight.resize(count);
        for (int i = 0; i < count; ++i) {
            const auto f = mu.frame(i);
            const double w = frame_weight(mu.ambient_dim(), mu.plane_dim(), f);
            const bool dead =
                w == 0.0 || w < degeneracy_threshold(mu.ambient_dim(), mu.plane_dim(), f);
            weight[i] = dead ? 0.0 : w;
            if (!dead) ++live;
        }
    }
};

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

// Cross Gram determinant det(u_k . v_l) of two frames.
double cross_det(int n, int d, std::span<const double> fu, std::span<const double> gu,
                 std::span<double> scratch) {
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
            scratch[k * d + l] = la::dot(fu.subspan(static_cast<std::size_t>(k) * n, n),
                                         gu.subspan(static_cast<std::size_t>(l) * n, n));
    return la::det(scratch, d);
}

} // namespace

double inner_product(const DiscreteVarifold& mu, const DiscreteVarifold& nu,
                     const SpatialKernel& kp, const GrassmannKernel& kg) {
    require_compatible(mu, nu);
    const int n = mu.ambient_dim();
    const int d = mu.plane_dim();
    const AtomCache wa(mu), wb(nu);

    std::vector<double> row(mu.atom_count(), 0.0);
    parallel_for(mu.atom_count(), [&](std::size_t i) {
        if (wa.weight[i] == 0.0) return;
        const auto xi = mu.position(static_cast<int>(i));
        const auto ui = mu.frame(static_cast<int>(i));
        std::vector<double> cross(static_cast<std::size_t>(d) * d);
        double acc = 0.0;
        for (int j = 0; j < nu.atom_count(); ++j) {
            if (wb.weight[j] == 0.0) continue;
            const double rr = wa.weight[i] * wb.weight[j];
            const double s = sq_dist(xi, nu.position(j));
            const double c = cross_det(n, d, ui, nu.frame(j), cross);
            acc += rr * kp.eval(s) * kg.eval(c / rr);
        }
        row[i] = acc;
    });
    return la::pairwise_sum(row);
}

double distance_sq(const DiscreteVarifold& mu, const DiscreteVarifold& nu,
                   const SpatialKernel& kp, const GrassmannKernel& kg) {
    const double value =
        inner_product(mu, mu, kp, kg) - 2.0 * inner_product(mu, nu, kp, kg) +
        inner_product(nu, nu, kp, kg);
    return std::max(0.0, value);
}

double total_mass(const DiscreteVarifold& mu) {
    std::vector<double> w(mu.atom_count());
    for (int i = 0; i < mu.atom_count(); ++i) w[i] = mu.weight(i);
    return la::pairwise_sum(w);
}

DiscreteVarifold rigid_transport(const DiscreteVarifold& mu, std::span<const double> rotation,
                                 std::span<const double> translation) {
    const int n = mu.ambient_dim();
    const int d = mu.plane_dim();
    DiscreteVarifold out(n, d);
    std::vector<double> x(n), frame(static_cast<std::size_t>(n) * d);
    for (int i = 0; i < mu.atom_count(); ++i) {
        const auto xi = mu.position(i);
        for (int r = 0; r < n; ++r) {
            double s = translation[r];
            for (int c = 0; c < n; ++c) s += rotation[r * n + c] * xi[c];
            x[r] = s;
        }
        apply_linear(n, d, rotation, mu.frame(i), frame);
        out.add_atom(x, frame);
    }
    return out;
}

DiscreteVarifold varifold_from_flat(int n, int d, int atoms, std::span<const double> q) {
    assert(q.size() == static_cast<std::size_t>(atoms) * n * (d + 1));
    DiscreteVarifold out(n, d);
    const std::size_t block = static_cast<std::size_t>(n) * (d + 1);
    for (int i = 0; i < atoms; ++i) {
        const auto atom = q.subspan(i * block, block);
        out.add_atom(atom.first(n), atom.subspan(n));
    }
    return out;
}

std::vector<double> flat_from_varifold(const DiscreteVarifold& mu) {
    const int n = mu.ambient_dim();
    const int d = mu.plane_dim();
    std::vector<double> q;
    q.reserve(static_cast<std::size_t>(mu.atom_count()) * n * (d + 1));
    for (int i = 0; i < mu.atom_count(); ++i) {
        const auto x = mu.position(i);
        const auto u = mu.frame(i);
        q.insert(q.end(), x.begin(), x.end());
        q.insert(q.end(), u.begin(), u.end());
    }
    return q;
}

namespace {

// Per-atom data for the differentiable side of the metric.
struct VariableAtoms {
    int n, d, atoms;
    std::span<const double> q;
    std::vector<double> weight; // 0 for dead atoms
    std::vector<double> dual;   // atoms * d * n; dual frame (G^-1 U), rows k

    VariableAtoms(int n_, int d_, int atoms_, std::span<const double> q_)
        : n(n_), d(d_), atoms(atoms_), q(q_), weight(atoms_, 0.0),
          dual(static_cast<std::size_t>(atoms_) * d_ * n_, 0.0) {
        std::vector<double> gram(static_cast<std::size_t>(d) * d);
        std::vector<double> ginv(static_cast<std::size_t>(d) * d);
        for (int i = 0; i < atoms; ++i) {
            const auto u = frame(i);
            la::gram_matrix(u, n, d, gram);
            const double det_g = la::det(gram, d);
            const double w = std::sqrt(std::max(0.0, det_g));
            if (w == 0.0 || w < degeneracy_threshold(n, d, u)) continue;
            if (!la::invert(gram, d, ginv)) continue;
            weight[i] = w;
            auto dual_i = std::span<double>(dual).subspan(
                static_cast<std::size_t>(i) * d * n, static_cast<std::size_t>(d) * n);
            for (int k = 0; k < d; ++k)
                for (int a = 0; a < d; ++a) {
                    const double coef = ginv[k * d + a];
                    const auto ua = u.subspan(static_cast<std::size_t>(a) * n, n);
                    for (int c = 0; c < n; ++c) dual_i[k * n + c] += coef * ua[c];
                }
        }
    }

    std::size_t block() const { return static_cast<std::size_t>(n) * (d + 1); }
    std::span<const double> position(int i) const { return q.subspan(i * block(), n); }
    std::span<const double> frame(int i) const {
        return q.subspan(i * block() + n, static_cast<std::size_t>(n) * d);
    }
    std::span<const double> dual_vec(int i, int k) const {
        return std::span<const double>(dual).subspan(
            (static_cast<std::size_t>(i) * d + k) * n, n);
    }
};

// Accumulates value and d(pair)/d(atom i of `va`) for the pair
// (va atom i, other atom given by x', U', w'). grad_x / grad_u may be empty
// spans for value-only evaluation. `scale` multiplies the gradient
// contribution (2 for the self sum, -2 for the cross sum).
double pair_value_grad(const VariableAtoms& va, int i, std::span<const double> xo,
                       std::span<const double> uo, double wo, const SpatialKernel& kp,
                       const GrassmannKernel& kg, double scale, std::span<double> grad_atom,
                       std::span<double> cross_scratch, std::span<double> cof_scratch) {
    const int n = va.n;
    const int d = va.d;
    const double wi = va.weight[i];
    const auto xi = va.position(i);
    const auto ui = va.frame(i);

    double s = 0.0;
    for (int c = 0; c < n; ++c) {
        const double diff = xi[c] - xo[c];
        s += diff * diff;
    }
    const double cdet = cross_det(n, d, ui, uo, cross_scratch);
    const double rr = wi * wo;
    const double t = cdet / rr;
    const double rho = kp.eval(s);
    const double gamma = kg.eval_raw(t);
    const double value = rr * rho * gamma;

    if (!grad_atom.empty()) {
        const double rho1 = kp.d1(s);
        const double gamma1 = kg.d1_raw(t);
        auto gx = grad_atom.first(n);
        // position: w w' gamma rho'(s) * 2 (x_i - x')
        const double cx = scale * rr * gamma * rho1 * 2.0;
        for (int c = 0; c < n; ++c) gx[c] += cx * (xi[c] - xo[c]);
        // frames: rho [ w w' (gamma - t gamma') dual_k + gamma' cof(M)_k. U' ]
        la::cofactor_matrix(cross_scratch.first(static_cast<std::size_t>(d) * d), d,
                            cof_scratch);
        const double cw = scale * rho * rr * (gamma - t * gamma1);
        const double cm = scale * rho * gamma1;
        for (int k = 0; k < d; ++k) {
            auto gu = grad_atom.subspan(static_cast<std::size_t>(n) * (k + 1), n);
            const auto dk = va.dual_vec(i, k);
            for (int c = 0; c < n; ++c) gu[c] += cw * dk[c];
            for (int l = 0; l < d; ++l) {
                const double coef = cm * cof_scratch[k * d + l];
                const auto ul = uo.subspan(static_cast<std::size_t>(l) * n, n);
                for (int c = 0; c < n; ++c) gu[c] += coef * ul[c];
            }
        }
    }
    return value;
}

} // namespace

double distance_sq_gradient(int n, int d, int atoms, std::span<const double> q,
                            const DiscreteVarifold& target, const SpatialKernel& kp,
                            const GrassmannKernel& kg, std::span<double> grad,
                            double target_norm_sq) {
    if (target.ambient_dim() != n || target.plane_dim() != d)
        throw DimensionMismatchError("distance_sq_gradient: target disagrees on (n, d)");
    assert(q.size() == static_cast<std::size_t>(atoms) * n * (d + 1));
    assert(grad.size() == q.size());
    std::fill(grad.begin(), grad.end(), 0.0);

    const VariableAtoms va(n, d, atoms, q);
    const AtomCache tc(target);
    const std::size_t block = va.block();

    std::vector<double> row_self(atoms, 0.0), row_cross(atoms, 0.0);
    parallel_for(atoms, [&](std::size_t i) {
        if (va.weight[i] == 0.0) return;
        std::vector<double> cross(static_cast<std::size_t>(d) * d);
        std::vector<double> cof(static_cast<std::size_t>(d) * d);
        auto grad_atom = grad.subspan(i * block, block);
        double self_acc = 0.0, cross_acc = 0.0;
        for (int j = 0; j < atoms; ++j) {
            if (va.weight[j] == 0.0) continue;
            self_acc += pair_value_grad(va, static_cast<int>(i), va.position(j), va.frame(j),
                                        va.weight[j], kp, kg, 2.0, grad_atom, cross, cof);
        }
        for (int j = 0; j < target.atom_count(); ++j) {
            if (tc.weight[j] == 0.0) continue;
            cross_acc +=
                pair_value_grad(va, static_cast<int>(i), target.position(j), target.frame(j),
                                tc.weight[j], kp, kg, -2.0, grad_atom, cross, cof);
        }
        row_self[i] = self_acc;
        row_cross[i] = cross_acc;
    });

    // Reduce over live atoms only, so the tree shape does not depend on how
    // many dead atoms pad the variable vector.
    std::vector<double> live_self, live_cross;
    live_self.reserve(atoms);
    live_cross.reserve(atoms);
    for (int i = 0; i < atoms; ++i) {
        if (va.weight[i] == 0.0) continue;
        live_self.push_back(row_self[i]);
        live_cross.push_back(row_cross[i]);
    }
    return la::pairwise_sum(live_self) - 2.0 * la::pairwise_sum(live_cross) + target_norm_sq;
}

double objective_norm_sq(const DiscreteVarifold& mu, const SpatialKernel& kp,
                         const GrassmannKernel& kg) {
    const int n = mu.ambient_dim();
    const int d = mu.plane_dim();
    const int atoms = mu.atom_count();
    const auto q = flat_from_varifold(mu);
    const VariableAtoms va(n, d, atoms, q);

    std::vector<double> rows(atoms, 0.0);
    parallel_for(atoms, [&](std::size_t i) {
        if (va.weight[i] == 0.0) return;
        std::vector<double> cross(static_cast<std::size_t>(d) * d);
        std::vector<double> cof(static_cast<std::size_t>(d) * d);
        double acc = 0.0;
        for (int j = 0; j < atoms; ++j) {
            if (va.weight[j] == 0.0) continue;
            acc += pair_value_grad(va, static_cast<int>(i), va.position(j), va.frame(j),
                                   va.weight[j], kp, kg, 0.0, {}, cross, cof);
        }
        rows[i] = acc;
    });
    std::vector<double> live;
    live.reserve(atoms);
    for (int i = 0; i < atoms; ++i)
        if (va.weight[i] != 0.0) live.push_back(rows[i]);
    return la::pairwise_sum(live);
}

double distance_sq_gradient(int n, int d, int atoms, std::span<const double> q,
                            const DiscreteVarifold& target, const SpatialKernel& kp,
                            const GrassmannKernel& kg, std::span<double> grad) {
    return distance_sq_gradient(n, d, atoms, q, target, kp, kg, grad,
                                objective_norm_sq(target, kp, kg));
}

} // namespace varimatch
