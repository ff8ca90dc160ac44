#include "varimatch/experiments.hpp"

#include "varimatch/common.hpp"
#include "varimatch/quantize.hpp"

#include <doctest.h>

#include <cmath>

using namespace varimatch;

namespace {

RunConfig fast_config() {
    RunConfig cfg;
    cfg.spatial.sigma_rho = 0.6;
    cfg.grassmann = {GrassmannKind::oriented_gaussian, 1.0};
    cfg.deformation.sigma_v = 0.8;
    cfg.lambda = 10.0;
    cfg.steps = 8;
    cfg.optimizer.max_iters = 250;
    cfg.seed = 3;
    return cfg;
}

} // namespace

TEST_CASE("wavy curve generator produces a closed 1-varifold") {
    const DiscreteVarifold mu = make_wavy_curve(60, 1.0, 0.3, 3, 0.15, 5);
    CHECK(mu.atom_count() == 60);
    CHECK(mu.ambient_dim() == 2);
    CHECK(mu.plane_dim() == 1);
    // closed: edge vectors sum to zero
    double sx = 0.0, sy = 0.0;
    for (int i = 0; i < mu.atom_count(); ++i) {
        sx += mu.frame_vector(i, 0)[0];
        sy += mu.frame_vector(i, 0)[1];
    }
    CHECK(std::abs(sx) < 1e-12);
    CHECK(std::abs(sy) < 1e-12);
    CHECK(total_mass(mu) > 6.0); // longer than the unit circle
}

TEST_CASE("spearman rank correlation") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {9, 7, 5, 3}) == doctest::Approx(-1.0));
    CHECK(std::abs(spearman({1, 2, 3, 4, 5}, {2, 1, 3, 1, 2})) < 1.0);
    CHECK_THROWS_AS(spearman({1}, {1}), ValidationError);
}

TEST_CASE("quant_curve rows: sorted, exact at full budget, monotone") {
    const DiscreteVarifold target = make_wavy_curve(40, 1.0, 0.25, 3, 0.1, 5);
    const RunConfig cfg = fast_config();
    const QuantCurveResult result = quant_curve(target, {20, 5, 40, 10}, cfg, 3);

    REQUIRE(result.rows.size() == 4);
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
        CHECK(result.rows[i].count > result.rows[i - 1].count);
        // nested warm starts make the curve monotone
        CHECK(result.rows[i].rel_err_quantize <=
              result.rows[i - 1].rel_err_quantize + 1e-10);
    }
    CHECK(result.rows.back().rel_err_quantize < 1e-8); // N = atom count

    const std::string csv = result.to_csv();
    CHECK(csv.find("N,rel_err_quantize,rel_err_subsample") == 0);
    // deterministic rerun gives the identical CSV
    CHECK(quant_curve(target, {20, 5, 40, 10}, cfg, 3).to_csv() == csv);

    CHECK_THROWS_AS(quant_curve(target, {100}, cfg, 3), ValidationError);
    CHECK_THROWS_AS(quant_curve(target, {}, cfg, 3), ValidationError);
}

TEST_CASE("gamma_conv: zero gap at full resolution, CSV determinism") {
    const DiscreteVarifold source = make_wavy_curve(12, 1.0, 0.2, 2, 0.0, 1);
    const DiscreteVarifold target = make_wavy_curve(12, 1.1, 0.05, 3, 0.0, 1);
    RunConfig cfg = fast_config();
    cfg.optimizer.max_iters = 150;

    const GammaConvResult result = gamma_conv(source, target, {12, 6}, cfg, 2);
    REQUIRE(result.rows.size() == 2);
    CHECK(result.rows[0].count == 6);
    CHECK(result.rows[1].count == 12);
    CHECK(std::isfinite(result.e_star));
    // N = atom count reproduces the full-resolution problem
    CHECK(std::abs(result.rows[1].gap_quantize) <= 1e-6 * (1.0 + result.e_star));

    const std::string csv = result.to_csv();
    CHECK(csv.find("N,E_quantize,gap_quantize,E_subsample,gap_subsample,E_star,flag") == 0);
    CHECK(gamma_conv(source, target, {12, 6}, cfg, 2).to_csv() == csv);
}
