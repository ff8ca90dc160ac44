#pragma once

#include "varimatch/config.hpp"
#include "varimatch/varifold.hpp"

#include <string>
#include <vector>

namespace varimatch {

struct QuantCurveRow {
    int count = 0;
    double rel_err_quantize = 0.0;
    double rel_err_subsample = 0.0;
};

struct QuantCurveResult {
    std::vector<QuantCurveRow> rows; ///< sorted by count ascending
    std::string to_csv() const;
};

/// For each N: best-of-restarts quantization error and the uniform-subsampling
/// baseline error, both relative in the kernel metric. Runs are nested: each
/// N warm-starts from the previous row's solution, which makes the quantize
/// column monotone.
QuantCurveResult quant_curve(const DiscreteVarifold& target, std::vector<int> counts,
                             const RunConfig& cfg, int restarts);

struct GammaConvRow {
    int count = 0;
    double e_quantize = 0.0;
    double gap_quantize = 0.0;
    double e_subsample = 0.0;
    double gap_subsample = 0.0;
    bool negative_gap_flag = false; ///< informational; tiny negatives can occur
};

struct GammaConvResult {
    double e_star = 0.0; ///< energy of the full-resolution registration
    std::vector<GammaConvRow> rows;
    std::string to_csv() const;
};

/// Registration-energy convergence study: solve the registration from reduced
/// sources (quantized and subsampled) and evaluate each estimated deformation
/// on the original problem by transporting the full-resolution source through
/// it. E* comes from registering the full source directly.
GammaConvResult gamma_conv(const DiscreteVarifold& source_full, const DiscreteVarifold& target,
                           std::vector<int> counts, const RunConfig& cfg, int restarts);

/// Closed polygonal curve r(theta) = radius * (1 + amp1 sin(harm1 theta)
/// + amp2 cos(harm2 theta)) as a 1-varifold in R^2, one atom per edge.
DiscreteVarifold make_wavy_curve(int segments, double radius, double amp1, int harm1,
                                 double amp2, int harm2);

/// Spearman rank correlation (average ranks for ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

} // namespace varimatch
