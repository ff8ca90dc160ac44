#pragma once

#include <span>
#include <string>

namespace varimatch {

/// Radial spatial kernel rho acting on squared distances,
/// rho(s) = exp(-s / sigma_rho^2). Only the Gaussian profile is provided;
/// presets are closed for v1.
struct SpatialKernel {
    double sigma_rho = 1.0;

    double eval(double s) const;
    double d1(double s) const;
    double d2(double s) const;
    double d3(double s) const;
};

enum class GrassmannKind {
    linear,            ///< gamma(t) = t; oriented, sign-sensitive, indefinite
    binet,             ///< gamma(t) = t^2; orientation-invariant, nonnegative
    oriented_gaussian, ///< gamma(t) = exp(-2(1-t)/sigma_g^2); oriented, positive
};

const char* to_string(GrassmannKind kind);
GrassmannKind grassmann_kind_from_string(const std::string& name);

/// Kernel gamma on Grassmann inner products t in [-1, 1].
struct GrassmannKernel {
    GrassmannKind kind = GrassmannKind::oriented_gaussian;
    double sigma_g = 1.0;

    /// Public evaluation clamps t to [-1, 1] on entry. The *_raw variants skip
    /// the clamp and are used on gradient paths, where t may exceed 1 by
    /// round-off and the clamp would introduce a spurious kink.
    double eval(double t) const;
    double d1(double t) const;
    double d2(double t) const;
    double d3(double t) const;
    double eval_raw(double t) const;
    double d1_raw(double t) const;

    /// True for binet and oriented_gaussian; those are the presets admissible
    /// for quantization (existence of projections needs nonnegative kernels).
    bool nonnegative() const { return kind != GrassmannKind::linear; }
    /// True when gamma distinguishes orientation (gamma(t) != gamma(-t)).
    bool oriented() const { return kind != GrassmannKind::binet; }
};

/// Scalar Gaussian deformation kernel K_V(x, y) = exp(-|x-y|^2 / sigma_v^2)
/// (diagonal operator kernel: the matrix kernel is this scalar times Id).
struct DeformationKernel {
    double sigma_v = 1.0;

    /// m-th derivative of the profile f(s) = exp(-s/sigma_v^2); the
    /// Hamiltonian right-hand side needs orders up to 3 and its
    /// linearization (the adjoint sweep) order 4.
    double profile(int order, double s) const;

    double eval(std::span<const double> x, std::span<const double> y) const;
    /// Gradient in x.
    void d1(std::span<const double> x, std::span<const double> y, std::span<double> out) const;
    /// Hessian in x, row-major n x n.
    void d2(std::span<const double> x, std::span<const double> y, std::span<double> out) const;
    /// Third derivative tensor in x, row-major n x n x n (out[(a*n+b)*n+c]).
    void d3(std::span<const double> x, std::span<const double> y, std::span<double> out) const;
};

} // namespace varimatch
