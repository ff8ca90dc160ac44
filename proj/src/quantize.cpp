#include "varimatch/quantize.hpp"

#include "varimatch/common.hpp"
#include "varimatch/linalg.hpp"
#include "varimatch/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace varimatch {

double quantize_objective_and_grad(int n, int d, int atoms, std::span<const double> q,
                                   const DiscreteVarifold& target, const SpatialKernel& kp,
                                   const GrassmannKernel& kg, std::span<double> grad) {
    if (target.atom_count() == 0)
        throw ValidationError("quantize objective: empty target varifold");
    return distance_sq_gradient(n, d, atoms, q, target, kp, kg, grad);
}

namespace {

QuantizeBox auto_box(const DiscreteVarifold& target) {
    const int n = target.ambient_dim();
    QuantizeBox box;
    box.lo.assign(n, std::numeric_limits<double>::infinity());
    box.hi.assign(n, -std::numeric_limits<double>::infinity());
    for (int i = 0; i < target.atom_count(); ++i) {
        const auto x = target.position(i);
        for (int c = 0; c < n; ++c) {
            box.lo[c] = std::min(box.lo[c], x[c]);
            box.hi[c] = std::max(box.hi[c], x[c]);
        }
    }
    for (int c = 0; c < n; ++c) {
        const double center = 0.5 * (box.lo[c] + box.hi[c]);
        const double half = 0.5 * (box.hi[c] - box.lo[c]) * 1.05;
        box.lo[c] = center - half;
        box.hi[c] = center + half;
    }
    return box;
}

std::vector<int> sample_distinct(Rng& rng, int count, int bound) {
    std::vector<int> pool(bound);
    for (int i = 0; i < bound; ++i) pool[i] = i;
    for (int i = 0; i < count; ++i) {
        const int j = i + static_cast<int>(rng.uniform_index(bound - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

// Flat init of N atoms. Dead atoms (all-zero frames) pad when fewer seeds
// than N are available; they have zero weight and zero gradient throughout.
std::vector<double> padded_init(const DiscreteVarifold& seeds, int n, int d, int total) {
    const std::size_t block = static_cast<std::size_t>(n) * (d + 1);
    std::vector<double> q(block * total, 0.0);
    std::vector<double> centroid(n, 0.0);
    for (int i = 0; i < seeds.atom_count(); ++i) {
        const auto x = seeds.position(i);
        for (int c = 0; c < n; ++c) centroid[c] += x[c] / seeds.atom_count();
    }
    for (int i = 0; i < total; ++i) {
        auto dst = std::span<double>(q).subspan(i * block, block);
        if (i < seeds.atom_count()) {
            const auto x = seeds.position(i);
            const auto u = seeds.frame(i);
            std::copy(x.begin(), x.end(), dst.begin());
            std::copy(u.begin(), u.end(), dst.begin() + n);
        } else {
            std::copy(centroid.begin(), centroid.end(), dst.begin());
            // frame left at zero: a zero-mass atom
        }
    }
    return q;
}

void jitter_frames(std::vector<double>& q, int n, int d, int atoms, double rel, Rng& rng) {
    const std::size_t block = static_cast<std::size_t>(n) * (d + 1);
    for (int i = 0; i < atoms; ++i) {
        for (int k = 0; k < d; ++k) {
            auto u = std::span<double>(q).subspan(i * block + (k + 1) * n, n);
            const double len = la::norm(u);
            if (len == 0.0) continue;
            for (int c = 0; c < n; ++c) u[c] += rel * len * rng.normal();
        }
    }
}

} // namespace

QuantizeReport quantize(const DiscreteVarifold& target, const QuantizeConfig& cfg,
                        const SpatialKernel& kp, const GrassmannKernel& kg) {
    if (target.atom_count() == 0) throw ValidationError("quantize: empty target varifold");
    if (cfg.target_count < 1) throw ValidationError("quantize: N must be >= 1");
    if (cfg.restarts < 1) throw ValidationError("quantize: restarts must be >= 1");
    if (!kg.nonnegative())
        throw ValidationError(
            "quantize: the linear Grassmann kernel is indefinite and not admissible for "
            "quantization; use binet or oriented_gaussian");

    const int n = target.ambient_dim();
    const int d = target.plane_dim();
    const int count = cfg.target_count;
    const int total_atoms = target.atom_count();
    const std::size_t block = static_cast<std::size_t>(n) * (d + 1);
    // evaluated through the objective's own pair loop so that the identity
    // initialization cancels to exactly zero
    const double target_norm_sq = objective_norm_sq(target, kp, kg);

    LbfgsConfig opt = cfg.optimizer;
    QuantizeBox box;
    bool boxed = false;
    if (cfg.box_mode == BoxMode::automatic) {
        box = auto_box(target);
        boxed = true;
    } else if (cfg.box_mode == BoxMode::fixed) {
        if (cfg.box.lo.size() != static_cast<std::size_t>(n) ||
            cfg.box.hi.size() != static_cast<std::size_t>(n))
            throw ValidationError("quantize: box bounds must have n entries");
        box = cfg.box;
        boxed = true;
    }
    if (boxed) {
        Bounds bounds;
        const double inf = std::numeric_limits<double>::infinity();
        bounds.lo.assign(block * count, -inf);
        bounds.hi.assign(block * count, inf);
        for (int i = 0; i < count; ++i)
            for (int c = 0; c < n; ++c) {
                bounds.lo[i * block + c] = box.lo[c];
                bounds.hi[i * block + c] = box.hi[c];
            }
        opt.projection = std::move(bounds);
    }

    Objective objective = [&](std::span<const double> q, std::span<double> grad) -> double {
        return distance_sq_gradient(n, d, count, q, target, kp, kg, grad, target_norm_sq);
    };

    // Restart initializations, in a fixed order:
    //   - identity (all target atoms) whenever N >= M;
    //   - warm start verbatim plus one dead atom, then a heaviest-split variant;
    //   - random subsets of N target atoms with small frame jitter.
    std::vector<std::vector<double>> inits;
    if (count >= total_atoms) inits.push_back(padded_init(target, n, d, count));
    if (cfg.warm_start && cfg.warm_start->atom_count() <= count &&
        cfg.warm_start->ambient_dim() == n && cfg.warm_start->plane_dim() == d) {
        inits.push_back(padded_init(*cfg.warm_start, n, d, count));
        if (cfg.warm_start->atom_count() < count && cfg.warm_start->atom_count() > 0) {
            // Split the heaviest atom into two offset halves.
            const DiscreteVarifold& ws = *cfg.warm_start;
            int heavy = 0;
            double heaviest = -1.0;
            for (int i = 0; i < ws.atom_count(); ++i) {
                const double w = ws.weight(i);
                if (w > heaviest) {
                    heaviest = w;
                    heavy = i;
                }
            }
            DiscreteVarifold split(n, d);
            const double frame_scale = std::pow(0.5, 1.0 / d);
            const double offset = 1e-3 * kp.sigma_rho;
            Rng rng(cfg.seed ^ 0x9e3779b9u);
            std::vector<double> dir(n);
            for (auto& v : dir) v = rng.normal();
            const double len = la::norm(dir);
            for (auto& v : dir) v /= (len > 0 ? len : 1.0);
            for (int i = 0; i < ws.atom_count(); ++i) {
                const auto x = ws.position(i);
                const auto u = ws.frame(i);
                if (i != heavy) {
                    split.add_atom(x, u);
                    continue;
                }
                std::vector<double> xs(x.begin(), x.end());
                std::vector<double> us(u.begin(), u.end());
                for (auto& v : us) v *= frame_scale;
                for (int c = 0; c < n; ++c) xs[c] = x[c] + offset * dir[c];
                split.add_atom(xs, us);
                for (int c = 0; c < n; ++c) xs[c] = x[c] - offset * dir[c];
                split.add_atom(xs, us);
            }
            inits.push_back(padded_init(split, n, d, count));
        }
    }
    for (int r = 0; static_cast<int>(inits.size()) < cfg.restarts; ++r) {
        Rng rng(cfg.seed + 1315423911ull * (r + 1));
        DiscreteVarifold seeds(n, d);
        if (count <= total_atoms) {
            for (int idx : sample_distinct(rng, count, total_atoms))
                seeds.add_atom(target.atom(idx));
        } else {
            for (int i = 0; i < total_atoms; ++i) seeds.add_atom(target.atom(i));
            for (int i = total_atoms; i < count; ++i)
                seeds.add_atom(target.atom(static_cast<int>(rng.uniform_index(total_atoms))));
        }
        auto q = padded_init(seeds, n, d, count);
        jitter_frames(q, n, d, count, 1e-3, rng);
        inits.push_back(std::move(q));
    }
    QuantizeReport report;
    double best_obj = std::numeric_limits<double>::infinity();
    std::vector<double> best_q;
    for (std::size_t r = 0; r < inits.size(); ++r) {
        if (boxed) {
            // keep initializations feasible
            for (int i = 0; i < count; ++i)
                for (int c = 0; c < n; ++c) {
                    double& v = inits[r][i * block + c];
                    v = std::clamp(v, box.lo[c], box.hi[c]);
                }
        }
        const LbfgsResult res = lbfgs_minimize(objective, inits[r], opt);
        report.iterations.push_back(res.iterations);
        if (res.f < best_obj) {
            best_obj = res.f;
            best_q = res.x;
            report.best_restart = static_cast<int>(r);
        }
    }

    // Drop collapsed atoms from the published result.
    DiscreteVarifold full = varifold_from_flat(n, d, count, best_q);
    DiscreteVarifold pruned(n, d);
    for (int i = 0; i < count; ++i) {
        const auto u = full.frame(i);
        if (!is_degenerate(n, d, u)) pruned.add_atom(full.position(i), u);
    }

    report.result = std::move(pruned);
    report.objective = std::max(0.0, best_obj);
    report.rel_error = std::sqrt(report.objective) / std::sqrt(target_norm_sq);
    const double result_norm_sq =
        inner_product(report.result, report.result, kp, kg);
    const double cross = inner_product(report.result, target, kp, kg);
    report.stationarity_gap = std::abs(result_norm_sq - cross) / target_norm_sq;
    report.norm_ratio = std::sqrt(result_norm_sq / target_norm_sq);
    return report;
}

DiscreteVarifold subsample_baseline(const DiscreteVarifold& target, int count,
                                    std::uint64_t seed) {
    const int total = target.atom_count();
    if (count < 1 || count > total)
        throw ValidationError("subsample_baseline: N must be in [1, atom count]");
    const int n = target.ambient_dim();
    const int d = target.plane_dim();

    Rng rng(seed);
    std::vector<int> keep = sample_distinct(rng, count, total);
    std::sort(keep.begin(), keep.end());

    std::vector<double> kept_weights(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) kept_weights[i] = target.weight(keep[i]);
    const double kept_mass = la::pairwise_sum(kept_weights);
    const double full_mass = total_mass(target);
    const double scale = kept_mass > 0.0 ? full_mass / kept_mass : 1.0;
    const double frame_scale = std::pow(scale, 1.0 / d);

    DiscreteVarifold out(n, d);
    std::vector<double> frame(static_cast<std::size_t>(n) * d);
    for (int idx : keep) {
        const auto u = target.frame(idx);
        for (std::size_t e = 0; e < frame.size(); ++e) frame[e] = frame_scale * u[e];
        out.add_atom(target.position(idx), frame);
    }
    return out;
}

} // namespace varimatch
