#include "varimatch/linalg.hpp"

#include "varimatch/rng.hpp"

#include <cassert>
#include <cmath>
#include <cstring>

namespace varimatch {
namespace la {

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

double pairwise_sum(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

namespace {

// LU with partial pivoting; returns determinant (0 on structural singularity).
double lu_det(std::vector<double> a, int k) {
    double det_sign = 1.0;
    for (int col = 0; col < k; ++col) {
        int pivot = col;
        double best = std::abs(a[col * k + col]);
        for (int r = col + 1; r < k; ++r) {
            const double v = std::abs(a[r * k + col]);
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (best == 0.0) return 0.0;
        if (pivot != col) {
            for (int c = 0; c < k; ++c) std::swap(a[pivot * k + c], a[col * k + c]);
            det_sign = -det_sign;
        }
        const double diag = a[col * k + col];
        for (int r = col + 1; r < k; ++r) {
            const double factor = a[r * k + col] / diag;
            a[r * k + col] = factor;
            for (int c = col + 1; c < k; ++c) a[r * k + c] -= factor * a[col * k + c];
        }
    }
    double d = det_sign;
    for (int i = 0; i < k; ++i) d *= a[i * k + i];
    return d;
}

} // namespace

double det(std::span<const double> m, int k) {
    switch (k) {
    case 0:
        return 1.0;
    case 1:
        return m[0];
    case 2:
        return m[0] * m[3] - m[1] * m[2];
    case 3:
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    default:
        return lu_det(std::vector<double>(m.begin(), m.end()), k);
    }
}

void cofactor_matrix(std::span<const double> m, int k, std::span<double> out) {
    assert(out.size() == static_cast<std::size_t>(k) * k);
    switch (k) {
    case 1:
        out[0] = 1.0;
        return;
    case 2:
        out[0] = m[3];
        out[1] = -m[2];
        out[2] = -m[1];
        out[3] = m[0];
        return;
    case 3: {
        auto at = [&](int r, int c) { return m[r * 3 + c]; };
        auto minor2 = [&](int r, int c) {
            int r0 = (r == 0) ? 1 : 0, r1 = (r == 2) ? 1 : 2;
            int c0 = (c == 0) ? 1 : 0, c1 = (c == 2) ? 1 : 2;
            return at(r0, c0) * at(r1, c1) - at(r0, c1) * at(r1, c0);
        };
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                out[r * 3 + c] = (((r + c) & 1) ? -1.0 : 1.0) * minor2(r, c);
        return;
    }
    default: {
        // Minor-by-minor; only reached for d > 3 which is off the fast path.
        std::vector<double> minor((k - 1) * (k - 1));
        for (int r = 0; r < k; ++r) {
            for (int c = 0; c < k; ++c) {
                int mr = 0;
                for (int rr = 0; rr < k; ++rr) {
                    if (rr == r) continue;
                    int mc = 0;
                    for (int cc = 0; cc < k; ++cc) {
                        if (cc == c) continue;
                        minor[mr * (k - 1) + mc] = m[rr * k + cc];
                        ++mc;
                    }
                    ++mr;
                }
                const double sign = ((r + c) & 1) ? -1.0 : 1.0;
                out[r * k + c] = sign * det(minor, k - 1);
            }
        }
        return;
    }
    }
}

bool invert(std::span<const double> m, int k, std::span<double> out) {
    const double d = det(m, k);
    if (d == 0.0 || !std::isfinite(d)) return false;
    std::vector<double> cof(static_cast<std::size_t>(k) * k);
    cofactor_matrix(m, k, cof);
    // inv = adj / det = cof^T / det
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) out[r * k + c] = cof[c * k + r] / d;
    return true;
}

void gram_matrix(std::span<const double> rows, int n, int d, std::span<double> out) {
    for (int a = 0; a < d; ++a) {
        for (int b = a; b < d; ++b) {
            const double g = dot(rows.subspan(a * n, n), rows.subspan(b * n, n));
            out[a * d + b] = g;
            out[b * d + a] = g;
        }
    }
}

std::vector<double> random_rotation(Rng& rng, int n) {
    std::vector<double> a(static_cast<std::size_t>(n) * n);
    for (auto& v : a) v = rng.normal();
    // Gram-Schmidt on rows.
    for (int r = 0; r < n; ++r) {
        for (int prev = 0; prev < r; ++prev) {
            const double proj = dot(std::span<const double>(a).subspan(r * n, n),
                                    std::span<const double>(a).subspan(prev * n, n));
            for (int c = 0; c < n; ++c) a[r * n + c] -= proj * a[prev * n + c];
        }
        const double len = norm(std::span<const double>(a).subspan(r * n, n));
        for (int c = 0; c < n; ++c) a[r * n + c] /= len;
    }
    if (det(a, n) < 0.0) {
        for (int c = 0; c < n; ++c) a[c] = -a[c]; // flip first row
    }
    return a;
}

} // namespace la
} // namespace varimatch
