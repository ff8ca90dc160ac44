#include "varimatch/lbfgs.hpp"

#include "varimatch/common.hpp"
#include "varimatch/linalg.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <deque>

namespace varimatch {

const char* to_string(LbfgsStatus status) {
    switch (status) {
    case LbfgsStatus::converged:
        return "converged";
    case LbfgsStatus::max_iterations:
        return "max_iterations";
    case LbfgsStatus::line_search_failed:
        return "line_search_failed";
    case LbfgsStatus::stalled:
        return "stalled";
    }
    return "?";
}

namespace {

struct Pair {
    std::vector<double> s, y;
    double rho; // 1 / (s.y)
};

void clamp_to(const Bounds& b, std::span<double> x) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], b.lo[i], b.hi[i]);
}

// Hermite cubic minimizer for bracketing interval endpoints; falls back to
// bisection when the interpolant is ill-conditioned or leaves the bracket.
double cubic_step(double a, double fa, double ga, double b, double fb, double gb) {
    const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - ga * gb;
    if (disc < 0.0 || !std::isfinite(disc)) return 0.5 * (a + b);
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    double candidate = b - (b - a) * ((gb + d2 - d1) / (gb - ga + 2.0 * d2));
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    const double margin = 0.05 * (hi - lo);
    if (!std::isfinite(candidate) || candidate < lo + margin || candidate > hi - margin)
        candidate = 0.5 * (a + b);
    return candidate;
}

struct LineSearchEval {
    double alpha, phi, dphi;
    bool full_wolfe = true; ///< false on the floor fallback (decrease only)
};

// Strong-Wolfe search on phi(alpha) = f(x + alpha * dir).
// Returns true with the accepted evaluation in `out`; x/grad scratch hold the
// accepted point on success.
bool wolfe_line_search(const Objective& f, std::span<const double> x0,
                       std::span<const double> dir, double f0, double dphi0, double c1,
                       double c2, double alpha_init, std::vector<double>& x_buf,
                       std::vector<double>& g_buf, LineSearchEval& out) {
    const std::size_t n = x0.size();
    auto eval = [&](double alpha) -> LineSearchEval {
        for (std::size_t i = 0; i < n; ++i) x_buf[i] = x0[i] + alpha * dir[i];
        const double value = f(x_buf, g_buf);
        return {alpha, value, la::dot(g_buf, dir)};
    };

    constexpr int kMaxExpand = 20;
    constexpr int kMaxZoom = 40;
    const double alpha_max = 1e10;

    auto zoom = [&](LineSearchEval lo, LineSearchEval hi) -> bool {
        for (int iter = 0; iter < kMaxZoom; ++iter) {
            const double alpha =
                cubic_step(lo.alpha, lo.phi, lo.dphi, hi.alpha, hi.phi, hi.dphi);
            LineSearchEval trial = eval(alpha);
            if (!std::isfinite(trial.phi)) {
                hi = trial;
                hi.phi = f0 + 1e300; // force shrink toward lo
                continue;
            }
            if (trial.phi > f0 + c1 * alpha * dphi0 || trial.phi >= lo.phi) {
                hi = trial;
            } else {
                if (std::abs(trial.dphi) <= -c2 * dphi0) {
                    out = trial;
                    return true;
                }
                if (trial.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                lo = trial;
            }
            if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, std::abs(lo.alpha)))
                break; // bracket collapsed
        }
        // Exhausted: near the floating-point floor of phi the curvature test is
        // noise. Fall back to the best sufficient-decrease point.
        if (lo.alpha > 0.0 && lo.phi <= f0 + c1 * lo.alpha * dphi0 && lo.phi < f0) {
            out = eval(lo.alpha);
            out.full_wolfe = false;
            return true;
        }
        return false;
    };

    LineSearchEval prev{0.0, f0, dphi0};
    double alpha = alpha_init;
    for (int iter = 0; iter < kMaxExpand; ++iter) {
        LineSearchEval cur = eval(alpha);
        if (!std::isfinite(cur.phi)) {
            // Step too long; shrink hard.
            alpha *= 0.25;
            continue;
        }
        if (cur.phi > f0 + c1 * alpha * dphi0 || (iter > 0 && cur.phi >= prev.phi))
            return zoom(prev, cur);
        if (std::abs(cur.dphi) <= -c2 * dphi0) {
            out = cur;
            return true;
        }
        if (cur.dphi >= 0.0) return zoom(cur, prev);
        prev = cur;
        alpha = std::min(2.0 * alpha, alpha_max);
    }
    return false;
}

} // namespace

LbfgsResult lbfgs_minimize(const Objective& f, std::span<const double> x0,
                           const LbfgsConfig& cfg) {
    const std::size_t n = x0.size();
    if (cfg.projection &&
        (cfg.projection->lo.size() != n || cfg.projection->hi.size() != n))
        throw ValidationError("lbfgs_minimize: projection bounds size mismatch");

    LbfgsResult result;
    result.x.assign(x0.begin(), x0.end());
    if (cfg.projection) clamp_to(*cfg.projection, result.x);

    std::vector<double> grad(n), x_buf(n), g_buf(n), dir(n);
    double value = f(result.x, grad);
    if (!std::isfinite(value))
        throw NumericalError("lbfgs_minimize: objective is non-finite at the start point");
    result.f_history.push_back(value);

    std::deque<Pair> history;

    auto criterion_norm = [&](std::span<const double> x, std::span<const double> g) {
        if (!cfg.projection) return la::norm(g);
        // Projected-gradient measure: |x - clamp(x - g)|.
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double moved =
                std::clamp(x[i] - g[i], cfg.projection->lo[i], cfg.projection->hi[i]);
            const double diff = x[i] - moved;
            acc += diff * diff;
        }
        return std::sqrt(acc);
    };

    int iter = 0;
    for (; iter < cfg.max_iters; ++iter) {
        result.grad_norm = criterion_norm(result.x, grad);
        if (result.grad_norm <= cfg.grad_tol * std::max(1.0, std::abs(value))) {
            result.status = LbfgsStatus::converged;
            result.f = value;
            result.iterations = iter;
            return result;
        }

        // Two-loop recursion.
        std::copy(grad.begin(), grad.end(), dir.begin());
        std::vector<double> alpha_coef(history.size());
        for (std::size_t h = history.size(); h-- > 0;) {
            const Pair& pr = history[h];
            const double a = pr.rho * la::dot(pr.s, dir);
            alpha_coef[h] = a;
            for (std::size_t i = 0; i < n; ++i) dir[i] -= a * pr.y[i];
        }
        if (!history.empty()) {
            const Pair& last = history.back();
            const double gamma = la::dot(last.s, last.y) / la::dot(last.y, last.y);
            for (auto& v : dir) v *= gamma;
        }
        for (std::size_t h = 0; h < history.size(); ++h) {
            const Pair& pr = history[h];
            const double beta = pr.rho * la::dot(pr.y, dir);
            for (std::size_t i = 0; i < n; ++i) dir[i] += (alpha_coef[h] - beta) * pr.s[i];
        }
        for (auto& v : dir) v = -v;

        double dphi0 = la::dot(grad, dir);
        if (dphi0 >= 0.0) {
            // Not a descent direction (stale curvature); restart from steepest descent.
            history.clear();
            for (std::size_t i = 0; i < n; ++i) dir[i] = -grad[i];
            dphi0 = la::dot(grad, dir);
            if (dphi0 == 0.0) {
                result.status = LbfgsStatus::converged;
                break;
            }
        }

        const double alpha_init =
            history.empty() ? std::min(1.0, 1.0 / std::max(1e-12, la::norm(grad))) : 1.0;
        LineSearchEval accepted{};
        const bool ok = wolfe_line_search(f, result.x, dir, value, dphi0, cfg.wolfe_c1,
                                          cfg.wolfe_c2, alpha_init, x_buf, g_buf, accepted);
        if (!ok) {
            result.status = LbfgsStatus::line_search_failed;
            break;
        }
        assert(accepted.phi <= value + cfg.wolfe_c1 * accepted.alpha * dphi0);
        assert(!accepted.full_wolfe ||
               std::abs(accepted.dphi) <= -cfg.wolfe_c2 * dphi0 + 1e-12);

        // x_buf/g_buf hold the accepted point.
        double new_value = accepted.phi;
        if (cfg.projection) {
            std::vector<double> projected(x_buf);
            clamp_to(*cfg.projection, projected);
            if (projected != x_buf) {
                std::copy(projected.begin(), projected.end(), x_buf.begin());
                new_value = f(x_buf, g_buf);
                double alpha = accepted.alpha;
                // Projection may undo the decrease; backtrack along the
                // projected path until it is restored.
                while (new_value >= value && alpha > 1e-20) {
                    alpha *= 0.5;
                    for (std::size_t i = 0; i < n; ++i)
                        x_buf[i] = result.x[i] + alpha * dir[i];
                    clamp_to(*cfg.projection, x_buf);
                    new_value = f(x_buf, g_buf);
                }
                if (new_value >= value) {
                    result.status = LbfgsStatus::stalled;
                    result.f = value;
                    result.iterations = iter;
                    result.grad_norm = criterion_norm(result.x, grad);
                    return result;
                }
            }
        }

        Pair pr;
        pr.s.resize(n);
        pr.y.resize(n);
        double step_norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            pr.s[i] = x_buf[i] - result.x[i];
            pr.y[i] = g_buf[i] - grad[i];
            step_norm += pr.s[i] * pr.s[i];
        }
        if (step_norm == 0.0) {
            result.status = LbfgsStatus::stalled;
            break;
        }
        const double sy = la::dot(pr.s, pr.y);
        if (sy > 1e-12 * la::norm(pr.s) * la::norm(pr.y)) {
            pr.rho = 1.0 / sy;
            history.push_back(std::move(pr));
            if (static_cast<int>(history.size()) > cfg.memory) history.pop_front();
        }

        std::copy(x_buf.begin(), x_buf.end(), result.x.begin());
        std::copy(g_buf.begin(), g_buf.end(), grad.begin());
        value = new_value;
        result.f_history.push_back(value);
    }

    if (iter >= cfg.max_iters) result.status = LbfgsStatus::max_iterations;
    result.f = value;
    result.iterations = iter;
    result.grad_norm = criterion_norm(result.x, grad);
    return result;
}

} // namespace varimatch
