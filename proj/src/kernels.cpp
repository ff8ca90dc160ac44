#include "varimatch/kernels.hpp"

#include "varimatch/common.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace varimatch {

double SpatialKernel::eval(double s) const { return std::exp(-s / (sigma_rho * sigma_rho)); }

double SpatialKernel::d1(double s) const {
    const double inv = 1.0 / (sigma_rho * sigma_rho);
    return -inv * eval(s);
}

double SpatialKernel::d2(double s) const {
    const double inv = 1.0 / (sigma_rho * sigma_rho);
    return inv * inv * eval(s);
}

double SpatialKernel::d3(double s) const {
    const double inv = 1.0 / (sigma_rho * sigma_rho);
    return -inv * inv * inv * eval(s);
}

const char* to_string(GrassmannKind kind) {
    switch (kind) {
    case GrassmannKind::linear:
        return "linear";
    case GrassmannKind::binet:
        return "binet";
    case GrassmannKind::oriented_gaussian:
        return "oriented_gaussian";
    }
    return "?";
}

GrassmannKind grassmann_kind_from_string(const std::string& name) {
    if (name == "linear") return GrassmannKind::linear;
    if (name == "binet") return GrassmannKind::binet;
    if (name == "oriented_gaussian") return GrassmannKind::oriented_gaussian;
    throw ValidationError("unknown Grassmann kernel kind '" + name +
                          "' (expected linear, binet or oriented_gaussian)");
}

double GrassmannKernel::eval_raw(double t) const {
    switch (kind) {
    case GrassmannKind::linear:
        return t;
    case GrassmannKind::binet:
        return t * t;
    case GrassmannKind::oriented_gaussian:
        return std::exp(-2.0 * (1.0 - t) / (sigma_g * sigma_g));
    }
    return 0.0;
}

double GrassmannKernel::d1_raw(double t) const {
    switch (kind) {
    case GrassmannKind::linear:
        return 1.0;
    case GrassmannKind::binet:
        return 2.0 * t;
    case GrassmannKind::oriented_gaussian:
        return (2.0 / (sigma_g * sigma_g)) * eval_raw(t);
    }
    return 0.0;
}

double GrassmannKernel::eval(double t) const { return eval_raw(std::clamp(t, -1.0, 1.0)); }
double GrassmannKernel::d1(double t) const { return d1_raw(std::clamp(t, -1.0, 1.0)); }

double GrassmannKernel::d2(double t) const {
    t = std::clamp(t, -1.0, 1.0);
    switch (kind) {
    case GrassmannKind::linear:
        return 0.0;
    case GrassmannKind::binet:
        return 2.0;
    case GrassmannKind::oriented_gaussian: {
        const double c = 2.0 / (sigma_g * sigma_g);
        return c * c * eval_raw(t);
    }
    }
    return 0.0;
}

double GrassmannKernel::d3(double t) const {
    t = std::clamp(t, -1.0, 1.0);
    switch (kind) {
    case GrassmannKind::linear:
    case GrassmannKind::binet:
        return 0.0;
    case GrassmannKind::oriented_gaussian: {
        const double c = 2.0 / (sigma_g * sigma_g);
        return c * c * c * eval_raw(t);
    }
    }
    return 0.0;
}

double DeformationKernel::profile(int order, double s) const {
    const double inv = 1.0 / (sigma_v * sigma_v);
    double scale = 1.0;
    for (int i = 0; i < order; ++i) scale *= -inv;
    return scale * std::exp(-s * inv);
}

namespace {
double sq_dist(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double diff = x[i] - y[i];
        s += diff * diff;
    }
    return s;
}
} // namespace

double DeformationKernel::eval(std::span<const double> x, std::span<const double> y) const {
    return profile(0, sq_dist(x, y));
}

void DeformationKernel::d1(std::span<const double> x, std::span<const double> y,
                           std::span<double> out) const {
    const double f1 = profile(1, sq_dist(x, y));
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = 2.0 * f1 * (x[i] - y[i]);
}

void DeformationKernel::d2(std::span<const double> x, std::span<const double> y,
                           std::span<double> out) const {
    const std::size_t n = x.size();
    const double s = sq_dist(x, y);
    const double f1 = profile(1, s);
    const double f2 = profile(2, s);
    for (std::size_t a = 0; a < n; ++a) {
        const double da = x[a] - y[a];
        for (std::size_t b = 0; b < n; ++b) {
            const double db = x[b] - y[b];
            out[a * n + b] = 4.0 * f2 * da * db + (a == b ? 2.0 * f1 : 0.0);
        }
    }
}

void DeformationKernel::d3(std::span<const double> x, std::span<const double> y,
                           std::span<double> out) const {
    const std::size_t n = x.size();
    const double s = sq_dist(x, y);
    const double f2 = profile(2, s);
    const double f3 = profile(3, s);
    for (std::size_t a = 0; a < n; ++a) {
        const double da = x[a] - y[a];
        for (std::size_t b = 0; b < n; ++b) {
            const double db = x[b] - y[b];
            for (std::size_t c = 0; c < n; ++c) {
                const double dc = x[c] - y[c];
                double v = 8.0 * f3 * da * db * dc;
                if (b == c) v += 4.0 * f2 * da;
                if (a == c) v += 4.0 * f2 * db;
                if (a == b) v += 4.0 * f2 * dc;
                out[(a * n + b) * n + c] = v;
            }
        }
    }
}

} // namespace varimatch
