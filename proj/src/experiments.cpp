#include "varimatch/experiments.hpp"

#include "varimatch/common.hpp"
#include "varimatch/io.hpp"
#include "varimatch/quantize.hpp"
#include "varimatch/registration.hpp"
#include "varimatch/shooting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace varimatch {

std::string QuantCurveResult::to_csv() const {
    std::string out = "N,rel_err_quantize,rel_err_subsample\n";
    for (const auto& row : rows)
        out += std::to_string(row.count) + "," + format_double(row.rel_err_quantize) + "," +
               format_double(row.rel_err_subsample) + "\n";
    return out;
}

QuantCurveResult quant_curve(const DiscreteVarifold& target, std::vector<int> counts,
                             const RunConfig& cfg, int restarts) {
    if (counts.empty()) throw ValidationError("quant_curve: no N values given");
    std::sort(counts.begin(), counts.end());
    for (int c : counts)
        if (c < 1 || c > target.atom_count())
            throw ValidationError("quant_curve: N=" + std::to_string(c) +
                                  " out of range [1, " + std::to_string(target.atom_count()) +
                                  "]");

    const double norm = std::sqrt(inner_product(target, target, cfg.spatial, cfg.grassmann));
    QuantCurveResult result;
    std::optional<DiscreteVarifold> previous;
    for (int count : counts) {
        QuantizeConfig qc;
        qc.target_count = count;
        qc.restarts = restarts;
        qc.seed = cfg.seed + count;
        qc.optimizer = cfg.optimizer;
        qc.warm_start = previous;
        const QuantizeReport report = quantize(target, qc, cfg.spatial, cfg.grassmann);

        const DiscreteVarifold sub = subsample_baseline(target, count, cfg.seed + count);
        const double sub_err =
            std::sqrt(distance_sq(sub, target, cfg.spatial, cfg.grassmann)) / norm;

        result.rows.push_back({count, report.rel_error, sub_err});
        previous = report.result;
    }
    return result;
}

std::string GammaConvResult::to_csv() const {
    std::string out = "N,E_quantize,gap_quantize,E_subsample,gap_subsample,E_star,flag\n";
    for (const auto& row : rows)
        out += std::to_string(row.count) + "," + format_double(row.e_quantize) + "," +
               format_double(row.gap_quantize) + "," + format_double(row.e_subsample) + "," +
               format_double(row.gap_subsample) + "," + format_double(e_star) + "," +
               (row.negative_gap_flag ? "negative_gap" : "ok") + "\n";
    return out;
}

namespace {

// E(v) on the ORIGINAL problem: kinetic term of the estimated flow plus the
// fidelity of the transported full-resolution source.
double energy_on_full_problem(const RegistrationReport& report,
                              const DiscreteVarifold& source_full,
                              const DiscreteVarifold& target, const RunConfig& cfg) {
    const DiscreteVarifold carried =
        transport_varifold(report.trajectory, source_full, cfg.deformation);
    return report.reg_term +
           cfg.lambda * distance_sq(carried, target, cfg.spatial, cfg.grassmann);
}

} // namespace

GammaConvResult gamma_conv(const DiscreteVarifold& source_full, const DiscreteVarifold& target,
                           std::vector<int> counts, const RunConfig& cfg, int restarts) {
    if (counts.empty()) throw ValidationError("gamma_conv: no N values given");
    std::sort(counts.begin(), counts.end());
    for (int c : counts)
        if (c < 1 || c > source_full.atom_count())
            throw ValidationError("gamma_conv: N=" + std::to_string(c) + " out of range [1, " +
                                  std::to_string(source_full.atom_count()) + "]");

    GammaConvResult result;
    const RegistrationReport full = register_varifolds(source_full, target, cfg);
    result.e_star = full.energy;

    std::optional<DiscreteVarifold> previous;
    for (int count : counts) {
        QuantizeConfig qc;
        qc.target_count = count;
        qc.restarts = restarts;
        qc.seed = cfg.seed + count;
        qc.optimizer = cfg.optimizer;
        qc.warm_start = previous;
        const QuantizeReport qrep = quantize(source_full, qc, cfg.spatial, cfg.grassmann);
        previous = qrep.result;

        const RegistrationReport reg_q = register_varifolds(qrep.result, target, cfg);
        const double e_q = energy_on_full_problem(reg_q, source_full, target, cfg);

        const DiscreteVarifold sub = subsample_baseline(source_full, count, cfg.seed + count);
        const RegistrationReport reg_s = register_varifolds(sub, target, cfg);
        const double e_s = energy_on_full_problem(reg_s, source_full, target, cfg);

        GammaConvRow row;
        row.count = count;
        row.e_quantize = e_q;
        row.gap_quantize = e_q - result.e_star;
        row.e_subsample = e_s;
        row.gap_subsample = e_s - result.e_star;
        row.negative_gap_flag = row.gap_quantize < 0.0 || row.gap_subsample < 0.0;
        result.rows.push_back(row);
    }
    return result;
}

DiscreteVarifold make_wavy_curve(int segments, double radius, double amp1, int harm1,
                                 double amp2, int harm2) {
    if (segments < 3) throw ValidationError("make_wavy_curve: need at least 3 segments");
    const double two_pi = 6.283185307179586476925286766559;
    auto vertex = [&](int i) {
        const double theta = two_pi * i / segments;
        const double r =
            radius * (1.0 + amp1 * std::sin(harm1 * theta) + amp2 * std::cos(harm2 * theta));
        return std::array<double, 2>{r * std::cos(theta), r * std::sin(theta)};
    };
    DiscreteVarifold mu(2, 1);
    for (int i = 0; i < segments; ++i) {
        const auto a = vertex(i);
        const auto b = vertex(i + 1);
        const std::vector<double> x{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
        const std::vector<double> u{b[0] - a[0], b[1] - a[1]};
        mu.add_atom(x, u);
    }
    return mu;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw ValidationError("spearman: need two equal-length series");
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
        std::vector<double> rank(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = 0.5 * (i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
            i = j + 1;
        }
        return rank;
    };
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double mean = (a.size() + 1) / 2.0;
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (ra[i] - mean) * (rb[i] - mean);
        da += (ra[i] - mean) * (ra[i] - mean);
        db += (rb[i] - mean) * (rb[i] - mean);
    }
    if (da == 0.0 || db == 0.0) return 0.0;
    return num / std::sqrt(da * db);
}

} // namespace varimatch
