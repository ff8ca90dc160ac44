#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace varimatch {
class Rng;

namespace la {

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double max_abs(std::span<const double> a);

/// Sum with a fixed binary reduction tree; the result does not depend on any
/// runtime partitioning, which keeps kernel sums reproducible.
double pairwise_sum(std::span<const double> values);

/// Determinant of a row-major k x k matrix. Direct expansion for k <= 3,
/// partially pivoted LU beyond that.
double det(std::span<const double> m, int k);

/// Cofactor matrix C with C[i][j] = d det(M) / d M[i][j] (row-major k x k).
/// Well defined for singular M as well.
void cofactor_matrix(std::span<const double> m, int k, std::span<double> out);

/// Inverse of a row-major k x k matrix; returns false when singular.
bool invert(std::span<const double> m, int k, std::span<double> out);

/// Gram matrix G[k][l] = u_k . u_l of d vectors of length n stored
/// contiguously (vector k at rows[k*n .. k*n+n)).
void gram_matrix(std::span<const double> rows, int n, int d, std::span<double> out);

/// Haar-ish random rotation in SO(n): QR of a Gaussian matrix with sign fix,
/// determinant corrected to +1. Row-major n x n output.
std::vector<double> random_rotation(Rng& rng, int n);

} // namespace la
} // namespace varimatch
