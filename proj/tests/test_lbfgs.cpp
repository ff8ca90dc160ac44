#include "varimatch/lbfgs.hpp"

#include "varimatch/common.hpp"
#include "varimatch/linalg.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace varimatch;

TEST_CASE("quadratic bowl converges in a few iterations") {
    const std::vector<double> a{1.5, -2.0, 0.25};
    Objective f = [&](std::span<const double> x, std::span<double> g) {
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double diff = x[i] - a[i];
            v += diff * diff;
            g[i] = 2.0 * diff;
        }
        return v;
    };
    LbfgsConfig cfg;
    const auto res = lbfgs_minimize(f, std::vector<double>{10.0, -3.0, 7.0}, cfg);
    CHECK(res.status == LbfgsStatus::converged);
    CHECK(res.iterations <= 5);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(res.x[i] - a[i]) < 1e-8);
}

TEST_CASE("Rosenbrock from the classic start") {
    Objective f = [](std::span<const double> x, std::span<double> g) {
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        g[0] = -2.0 * a - 400.0 * x[0] * b;
        g[1] = 200.0 * b;
        return a * a + 100.0 * b * b;
    };
    LbfgsConfig cfg;
    cfg.grad_tol = 1e-10;
    const auto res = lbfgs_minimize(f, std::vector<double>{-1.2, 1.0}, cfg);
    CHECK(res.status == LbfgsStatus::converged);
    CHECK(res.iterations <= 100);
    CHECK(std::abs(res.x[0] - 1.0) < 1e-6);
    CHECK(std::abs(res.x[1] - 1.0) < 1e-6);
}

TEST_CASE("monotone decrease across accepted iterates") {
    Objective f = [](std::span<const double> x, std::span<double> g) {
        // slightly nasty quartic
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            v += std::pow(x[i], 4) - 3.0 * x[i] * x[i] + 0.5 * x[i];
            g[i] = 4.0 * std::pow(x[i], 3) - 6.0 * x[i] + 0.5;
        }
        return v;
    };
    const auto res = lbfgs_minimize(f, std::vector<double>{2.0, -1.7, 0.3, 4.0}, LbfgsConfig{});
    for (std::size_t i = 1; i < res.f_history.size(); ++i)
        CHECK(res.f_history[i] < res.f_history[i - 1]);
}

TEST_CASE("accepted steps decrease on a non-convex objective") {
    Objective f = [&](std::span<const double> x, std::span<double> g) {
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            v += (i + 1.0) * x[i] * x[i] + std::sin(x[i]);
            g[i] = 2.0 * (i + 1.0) * x[i] + std::cos(x[i]);
        }
        return v;
    };
    LbfgsConfig cfg;
    const auto res = lbfgs_minimize(f, std::vector<double>{3.0, -2.0}, cfg);
    CHECK(res.status == LbfgsStatus::converged);
    // Wolfe sufficient decrease implies strict improvement at every step
    for (std::size_t i = 1; i < res.f_history.size(); ++i)
        CHECK(res.f_history[i] < res.f_history[i - 1] + 1e-15);
}

TEST_CASE("projected variant pins the active bound") {
    Objective f = [](std::span<const double> x, std::span<double> g) {
        g[0] = 2.0 * x[0];
        return x[0] * x[0];
    };
    LbfgsConfig cfg;
    cfg.projection = Bounds{{1.0}, {2.0}};
    const auto res = lbfgs_minimize(f, std::vector<double>{1.7}, cfg);
    CHECK(res.x[0] == doctest::Approx(1.0));
    CHECK(res.status == LbfgsStatus::converged);

    // start outside the box: the initial clamp applies
    const auto res2 = lbfgs_minimize(f, std::vector<double>{5.0}, cfg);
    CHECK(res2.x[0] == doctest::Approx(1.0));
}

TEST_CASE("determinism: identical runs produce identical iterates") {
    Objective f = [](std::span<const double> x, std::span<double> g) {
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        g[0] = -2.0 * a - 400.0 * x[0] * b;
        g[1] = 200.0 * b;
        return a * a + 100.0 * b * b;
    };
    const auto r1 = lbfgs_minimize(f, std::vector<double>{-1.2, 1.0}, LbfgsConfig{});
    const auto r2 = lbfgs_minimize(f, std::vector<double>{-1.2, 1.0}, LbfgsConfig{});
    CHECK(r1.x == r2.x);
    CHECK(r1.f_history == r2.f_history);
}

TEST_CASE("non-finite start throws") {
    Objective f = [](std::span<const double>, std::span<double> g) {
        g[0] = 0.0;
        return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(lbfgs_minimize(f, std::vector<double>{0.0}, LbfgsConfig{}),
                    NumericalError);
}
