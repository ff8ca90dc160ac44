#pragma once

#include "varimatch/frame.hpp"
#include "varimatch/kernels.hpp"

#include <span>
#include <vector>

namespace varimatch {

/// One weighted Dirac: a position plus a frame whose d-volume is the weight.
struct OrientedFrameAtom {
    std::vector<double> x;     ///< n entries
    std::vector<double> frame; ///< d*n entries, vector k at [k*n, (k+1)*n)
};

/// Finite sum of weighted Diracs on R^n x (oriented d-planes), stored as
/// flat position/frame arrays. Atoms with (near-)zero frame weight are kept
/// in storage but contribute nothing to kernel sums.
class DiscreteVarifold {
public:
    DiscreteVarifold() = default;
    DiscreteVarifold(int n, int d) : n_(n), d_(d) {}

    int ambient_dim() const { return n_; }
    int plane_dim() const { return d_; }
    int atom_count() const { return count_; }

    void add_atom(std::span<const double> x, std::span<const double> frame);
    void add_atom(const OrientedFrameAtom& atom) { add_atom(atom.x, atom.frame); }

    std::span<const double> position(int i) const {
        return std::span<const double>(x_).subspan(static_cast<std::size_t>(i) * n_, n_);
    }
    std::span<const double> frame(int i) const {
        return std::span<const double>(u_).subspan(static_cast<std::size_t>(i) * n_ * d_,
                                                   static_cast<std::size_t>(n_) * d_);
    }
    std::span<const double> frame_vector(int i, int k) const {
        return frame(i).subspan(static_cast<std::size_t>(k) * n_, n_);
    }
    double weight(int i) const { return frame_weight(n_, d_, frame(i)); }
    OrientedFrameAtom atom(int i) const;

    std::span<double> mutable_position(int i) {
        return std::span<double>(x_).subspan(static_cast<std::size_t>(i) * n_, n_);
    }
    std::span<double> mutable_frame(int i) {
        return std::span<double>(u_).subspan(static_cast<std::size_t>(i) * n_ * d_,
                                             static_cast<std::size_t>(n_) * d_);
    }

    const std::vector<double>& positions_raw() const { return x_; }
    const std::vector<double>& frames_raw() const { return u_; }

    bool operator==(const DiscreteVarifold& other) const = default;

private:
    int n_ = 0;
    int d_ = 0;
    int count_ = 0;
    std::vector<double> x_;
    std::vector<double> u_;
};

/// <mu, mu'>_W*: double sum of r_i r'_j rho(|x_i - x'_j|^2) gamma(<T_i, T'_j>)
/// over all atom pairs. Zero-weight atoms are skipped. Symmetric.
double inner_product(const DiscreteVarifold& mu, const DiscreteVarifold& nu,
                     const SpatialKernel& kp, const GrassmannKernel& kg);

/// Squared kernel distance |mu|^2 - 2<mu,nu> + |nu|^2, clamped at 0.
double distance_sq(const DiscreteVarifold& mu, const DiscreteVarifold& nu,
                   const SpatialKernel& kp, const GrassmannKernel& kg);

/// Sum of frame weights.
double total_mass(const DiscreteVarifold& mu);

/// Applies x -> R x + b to positions and R to frame vectors.
DiscreteVarifold rigid_transport(const DiscreteVarifold& mu, std::span<const double> rotation,
                                 std::span<const double> translation);

/// Flat encoding of the variable atoms used by quantization and fidelity:
/// per atom the position (n) followed by the d frame vectors (d*n).
DiscreteVarifold varifold_from_flat(int n, int d, int atoms, std::span<const double> q);
std::vector<double> flat_from_varifold(const DiscreteVarifold& mu);

/// Value and exact gradient of q -> |mu^q - target|^2 with respect to every
/// position and frame component of the flat vector q. Gradients of
/// sub-threshold (zero-mass) atoms' kernel terms are 0 by the smooth-extension
/// convention. grad must have q.size() entries; it is overwritten.
double distance_sq_gradient(int n, int d, int atoms, std::span<const double> q,
                            const DiscreteVarifold& target, const SpatialKernel& kp,
                            const GrassmannKernel& kg, std::span<double> grad,
                            double target_norm_sq);

/// Convenience overload computing |target|^2 internally.
double distance_sq_gradient(int n, int d, int atoms, std::span<const double> q,
                            const DiscreteVarifold& target, const SpatialKernel& kp,
                            const GrassmannKernel& kg, std::span<double> grad);

/// |mu|^2 evaluated through the same pair loop and reduction order as
/// distance_sq_gradient. Supplying this as target_norm_sq makes the objective
/// cancel exactly (to the last bit) when the variable atoms coincide with the
/// target, which is what the identity-restart recovery guarantee relies on.
double objective_norm_sq(const DiscreteVarifold& mu, const SpatialKernel& kp,
                         const GrassmannKernel& kg);

} // namespace varimatch
