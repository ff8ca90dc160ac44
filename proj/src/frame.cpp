#include "varimatch/frame.hpp"

#include "varimatch/common.hpp"
#include "varimatch/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace varimatch {

double frame_weight(int n, int d, std::span<const double> vectors) {
    std::vector<double> gram(static_cast<std::size_t>(d) * d);
    la::gram_matrix(vectors, n, d, gram);
    const double g = la::det(gram, d);
    return std::sqrt(std::max(0.0, g));
}

double frame_weight(const Frame& f) { return frame_weight(f.n, f.d, f.vectors); }

double degeneracy_threshold(int n, int d, std::span<const double> vectors) {
    double max_norm = 0.0;
    for (int k = 0; k < d; ++k)
        max_norm = std::max(max_norm, la::norm(vectors.subspan(static_cast<std::size_t>(k) * n, n)));
    return 1e-12 * std::pow(max_norm, d);
}

bool is_degenerate(int n, int d, std::span<const double> vectors) {
    const double w = frame_weight(n, d, vectors);
    return w == 0.0 || w < degeneracy_threshold(n, d, vectors);
}

double grassmann_inner(int n, int d, std::span<const double> fu, std::span<const double> gu) {
    const double rf = frame_weight(n, d, fu);
    const double rg = frame_weight(n, d, gu);
    if (rf < degeneracy_threshold(n, d, fu) || rf == 0.0)
        throw DegenerateFrameError("grassmann_inner: first frame is degenerate");
    if (rg < degeneracy_threshold(n, d, gu) || rg == 0.0)
        throw DegenerateFrameError("grassmann_inner: second frame is degenerate");

    std::vector<double> cross(static_cast<std::size_t>(d) * d);
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
            cross[k * d + l] = la::dot(fu.subspan(static_cast<std::size_t>(k) * n, n),
                                       gu.subspan(static_cast<std::size_t>(l) * n, n));
    const double t = la::det(cross, d) / (rf * rg);
    return std::clamp(t, -1.0, 1.0);
}

double grassmann_inner(const Frame& f, const Frame& g) {
    if (f.n != g.n || f.d != g.d)
        throw DimensionMismatchError("grassmann_inner: frames live in different spaces");
    return grassmann_inner(f.n, f.d, f.vectors, g.vectors);
}

void apply_linear(int n, int d, std::span<const double> a, std::span<const double> in,
                  std::span<double> out) {
    for (int k = 0; k < d; ++k) {
        const auto u = in.subspan(static_cast<std::size_t>(k) * n, n);
        auto v = out.subspan(static_cast<std::size_t>(k) * n, n);
        for (int r = 0; r < n; ++r) {
            double s = 0.0;
            for (int c = 0; c < n; ++c) s += a[r * n + c] * u[c];
            v[r] = s;
        }
    }
}

Frame apply_linear(std::span<const double> a, const Frame& f) {
    Frame out(f.n, f.d);
    apply_linear(f.n, f.d, a, f.vectors, out.vectors);
    return out;
}

} // namespace varimatch
