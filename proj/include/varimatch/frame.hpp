#pragma once

#include <span>
#include <vector>

namespace varimatch {

/// An ordered list of d spanning vectors in R^n, stored row-major
/// (vector k occupies vectors[k*n .. k*n+n)). The frame encodes both the
/// oriented d-plane it spans and, through its d-volume, a nonnegative weight.
struct Frame {
    int n = 0;
    int d = 0;
    std::vector<double> vectors;

    Frame() = default;
    Frame(int n_, int d_) : n(n_), d(d_), vectors(static_cast<std::size_t>(n_) * d_, 0.0) {}
    Frame(int n_, int d_, std::vector<double> v) : n(n_), d(d_), vectors(std::move(v)) {}

    std::span<const double> vec(int k) const {
        return std::span<const double>(vectors).subspan(static_cast<std::size_t>(k) * n, n);
    }
    std::span<double> vec(int k) {
        return std::span<double>(vectors).subspan(static_cast<std::size_t>(k) * n, n);
    }
};

/// d-volume of the parallelotope spanned by the frame:
/// sqrt(max(0, det(u_k . u_l))). Total function; near-degenerate Gram
/// determinants are clamped at zero.
double frame_weight(int n, int d, std::span<const double> vectors);
double frame_weight(const Frame& f);

/// Relative degeneracy cutoff: weights below
/// 1e-12 * (max vector norm)^d are treated as zero mass.
double degeneracy_threshold(int n, int d, std::span<const double> vectors);
bool is_degenerate(int n, int d, std::span<const double> vectors);

/// Cosine-like inner product of the two oriented planes:
/// det(u_k . v_l) / (|F| |F'|), clamped to [-1, 1].
/// Throws DegenerateFrameError when either frame has zero weight.
double grassmann_inner(const Frame& f, const Frame& g);
double grassmann_inner(int n, int d, std::span<const double> fu, std::span<const double> gu);

/// Applies a linear map A (row-major n x n) to every frame vector. No
/// renormalization: the output weight tracks the d-volume change under A.
Frame apply_linear(std::span<const double> a, const Frame& f);
void apply_linear(int n, int d, std::span<const double> a, std::span<const double> in,
                  std::span<double> out);

} // namespace varimatch
