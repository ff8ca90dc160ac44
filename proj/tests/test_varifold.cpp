#include "varimatch/varifold.hpp"

#include "varimatch/common.hpp"
#include "varimatch/linalg.hpp"
#include "varimatch/rng.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace varimatch;
using test_util::random_varifold;

namespace {
const SpatialKernel kRho{1.0};
const GrassmannKernel kLinear{GrassmannKind::linear};
const GrassmannKernel kBinet{GrassmannKind::binet};
const GrassmannKernel kOg{GrassmannKind::oriented_gaussian, 1.0};
} // namespace

TEST_CASE("inner_product on the worked single-atom examples") {
    DiscreteVarifold mu(2, 1);
    mu.add_atom(std::vector<double>{0.4, -0.7}, std::vector<double>{2.0, 0.0});
    // r^2 * rho(0) * gamma(1) = 4
    CHECK(inner_product(mu, mu, kRho, kLinear) == doctest::Approx(4.0));

    DiscreteVarifold a(2, 1), b(2, 1);
    a.add_atom(std::vector<double>{0, 0}, std::vector<double>{1, 0});
    b.add_atom(std::vector<double>{1, 0}, std::vector<double>{1, 1});
    // independent-script value: 1 * sqrt2 * e^-1 * (1/sqrt2)
    CHECK(inner_product(a, b, kRho, kLinear) ==
          doctest::Approx(0.36787944117144233).epsilon(1e-15));
    CHECK(inner_product(b, a, kRho, kLinear) ==
          doctest::Approx(inner_product(a, b, kRho, kLinear)));

    DiscreteVarifold c(2, 1);
    c.add_atom(std::vector<double>{0, 0}, std::vector<double>{0, 1});
    CHECK(inner_product(a, c, kRho, kLinear) == doctest::Approx(0.0));

    DiscreteVarifold wrong(3, 1);
    wrong.add_atom(std::vector<double>{0, 0, 0}, std::vector<double>{1, 0, 0});
    CHECK_THROWS_AS(inner_product(a, wrong, kRho, kLinear), DimensionMismatchError);
}

TEST_CASE("distance_sq basics") {
    Rng rng(41);
    const DiscreteVarifold mu = random_varifold(rng, 2, 1, 6);
    CHECK(distance_sq(mu, mu, kRho, kBinet) == doctest::Approx(0.0));

    DiscreteVarifold empty(2, 1);
    CHECK(distance_sq(empty, mu, kRho, kBinet) ==
          doctest::Approx(inner_product(mu, mu, kRho, kBinet)));

    DiscreteVarifold a(2, 1), b(2, 1);
    a.add_atom(std::vector<double>{0, 0}, std::vector<double>{1, 0});
    b.add_atom(std::vector<double>{1, 0}, std::vector<double>{1, 1});
    CHECK(distance_sq(a, b, kRho, kLinear) ==
          doctest::Approx(2.2642411176571153).epsilon(1e-15));
}

TEST_CASE("total_mass") {
    DiscreteVarifold empty(2, 1);
    CHECK(total_mass(empty) == 0.0);
    DiscreteVarifold mu(2, 1);
    mu.add_atom(std::vector<double>{0, 0}, std::vector<double>{1, 0});
    mu.add_atom(std::vector<double>{1, 0}, std::vector<double>{0, 2});
    mu.add_atom(std::vector<double>{2, 0}, std::vector<double>{3, 0});
    CHECK(total_mass(mu) == doctest::Approx(6.0));
}

TEST_CASE("zero-weight atoms are stored but contribute nothing") {
    DiscreteVarifold mu(2, 1);
    mu.add_atom(std::vector<double>{0, 0}, std::vector<double>{1, 0});
    mu.add_atom(std::vector<double>{5, 5}, std::vector<double>{0, 0});
    CHECK(mu.atom_count() == 2);
    CHECK(inner_product(mu, mu, kRho, kOg) == doctest::Approx(1.0));
    CHECK(total_mass(mu) == doctest::Approx(1.0));
}

TEST_CASE("rigid_transport preserves mass and distances") {
    Rng rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = trial % 2 ? 2 : 3;
        const int d = 1 + (trial % 2 == 0 && trial % 3 == 0 ? 1 : 0);
        const DiscreteVarifold mu = random_varifold(rng, n, d, 5);
        const DiscreteVarifold nu = random_varifold(rng, n, d, 4);
        const auto rot = la::random_rotation(rng, n);
        std::vector<double> shift(n);
        for (auto& v : shift) v = rng.normal();

        const DiscreteVarifold mur = rigid_transport(mu, rot, shift);
        const DiscreteVarifold nur = rigid_transport(nu, rot, shift);
        CHECK(std::abs(total_mass(mur) - total_mass(mu)) <=
              1e-12 * std::max(1.0, total_mass(mu)));

        for (const auto* kg : {&kLinear, &kBinet, &kOg}) {
            const double before = distance_sq(mu, nu, kRho, *kg);
            const double after = distance_sq(mur, nur, kRho, *kg);
            CHECK(std::abs(after - before) <= 1e-10 * std::max(1.0, before));
        }
    }

    DiscreteVarifold mu(2, 1);
    mu.add_atom(std::vector<double>{1, 2}, std::vector<double>{0, 3});
    const std::vector<double> eye{1, 0, 0, 1}, zero{0, 0};
    CHECK(rigid_transport(mu, eye, zero) == mu);
}

TEST_CASE("Cauchy-Schwarz and triangle inequality on random varifolds") {
    Rng rng(44);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = trial % 2 ? 2 : 3;
        const DiscreteVarifold a = random_varifold(rng, n, 1, 4);
        const DiscreteVarifold b = random_varifold(rng, n, 1, 3);
        const DiscreteVarifold c = random_varifold(rng, n, 1, 3);
        for (const auto* kg : {&kBinet, &kOg}) {
            const double na = std::sqrt(inner_product(a, a, kRho, *kg));
            const double nb = std::sqrt(inner_product(b, b, kRho, *kg));
            const double ip = inner_product(a, b, kRho, *kg);
            CHECK(std::abs(ip) <= na * nb * (1.0 + 1e-10) + 1e-12);

            const double dab = std::sqrt(distance_sq(a, b, kRho, *kg));
            const double dac = std::sqrt(distance_sq(a, c, kRho, *kg));
            const double dcb = std::sqrt(distance_sq(c, b, kRho, *kg));
            CHECK(dab <= dac + dcb + 1e-10);
        }
    }
}

TEST_CASE("orientation behavior of the presets on single-atom pairs") {
    Rng rng(45);
    for (int trial = 0; trial < 25; ++trial) {
        DiscreteVarifold a = random_varifold(rng, 3, 2, 1);
        const DiscreteVarifold b = random_varifold(rng, 3, 2, 1);
        DiscreteVarifold a_flip(3, 2);
        {
            auto atom = a.atom(0);
            for (int c = 0; c < 3; ++c) atom.frame[3 + c] = -atom.frame[3 + c];
            a_flip.add_atom(atom);
        }
        // binet ignores the flip entirely
        CHECK(inner_product(a_flip, b, kRho, kBinet) ==
              doctest::Approx(inner_product(a, b, kRho, kBinet)).epsilon(1e-12));
        // linear negates the cross term
        CHECK(inner_product(a_flip, b, kRho, kLinear) ==
              doctest::Approx(-inner_product(a, b, kRho, kLinear)).epsilon(1e-12));
    }
}

TEST_CASE("gauge invariance of the metric under det-1 frame changes") {
    Rng rng(46);
    for (int trial = 0; trial < 25; ++trial) {
        const DiscreteVarifold a = random_varifold(rng, 3, 2, 3);
        const DiscreteVarifold b = random_varifold(rng, 3, 2, 2);
        // shear one atom's frame: u0' = u0 + 0.7 u1 (determinant-1 right factor)
        DiscreteVarifold sheared(3, 2);
        for (int i = 0; i < a.atom_count(); ++i) {
            auto atom = a.atom(i);
            if (i == 1) {
                for (int c = 0; c < 3; ++c) atom.frame[c] += 0.7 * atom.frame[3 + c];
            }
            sheared.add_atom(atom);
        }
        for (const auto* kg : {&kLinear, &kBinet, &kOg}) {
            const double base = inner_product(a, b, kRho, *kg);
            CHECK(std::abs(inner_product(sheared, b, kRho, *kg) - base) <=
                  1e-12 * std::max(1.0, std::abs(base)));
        }
    }
}

TEST_CASE("distance_sq_gradient matches finite differences") {
    Rng rng(47);
    for (const auto* kg : {&kLinear, &kBinet, &kOg}) {
        for (int trial = 0; trial < 6; ++trial) {
            const int n = trial % 2 ? 3 : 2;
            const int d = trial % 3 == 2 ? 2 : 1;
            const int atoms = 3;
            const DiscreteVarifold target = random_varifold(rng, n, d, 4);
            const DiscreteVarifold start = random_varifold(rng, n, d, atoms);
            const auto q0 = flat_from_varifold(start);
            std::vector<double> grad(q0.size());
            distance_sq_gradient(n, d, atoms, q0, target, kRho, *kg, grad);

            auto value = [&](std::span<const double> q) {
                std::vector<double> scratch(q.size());
                return distance_sq_gradient(n, d, atoms, q, target, kRho, *kg, scratch);
            };
            CHECK(test_util::gradient_vs_fd(value, q0, grad, 1e-6) < 1e-6);
        }
    }
}

TEST_CASE("gradient of a dead atom's variables is zero") {
    DiscreteVarifold target(2, 1);
    target.add_atom(std::vector<double>{0, 0}, std::vector<double>{1, 0});
    // one live atom and one zero-frame atom
    std::vector<double> q{0.5, 0.0, 1.0, 0.0, /* dead: */ 2.0, 2.0, 0.0, 0.0};
    std::vector<double> grad(q.size());
    distance_sq_gradient(2, 1, 2, q, target, kRho, kOg, grad);
    for (std::size_t e = 4; e < 8; ++e) CHECK(grad[e] == 0.0);
}
