#pragma once

#include "fedep/matrix.hpp"

#include <cstdint>

namespace fedep {

/// Frobenius tolerance on ||W^T W - I|| for a valid Stiefel point.
inline constexpr double kOrthTol = 1e-10;

/// An n x m matrix with orthonormal columns. Validated on construction and
/// re-established by every retraction.
class StiefelPoint {
   public:
    explicit StiefelPoint(Matrix basis);

    /// Project an arbitrary full-column-rank matrix onto the manifold via
    /// thin QR with the R diagonal forced positive.
    static StiefelPoint orthonormalize(const Matrix& a);

    /// QR of a seeded Gaussian matrix; deterministic in the seed.
    static StiefelPoint random(Index n, Index m, std::uint64_t seed);

    const Matrix& basis() const { return basis_; }
    Index ambient_dim() const { return basis_.rows(); }
    Index subspace_dim() const { return basis_.cols(); }

    /// ||W^T W - I||_F.
    double orthonormality_defect() const;

   private:
    struct Unchecked {};
    StiefelPoint(Matrix basis, Unchecked) : basis_(std::move(basis)) {}

    Matrix basis_;

    friend StiefelPoint retract(const StiefelPoint& w, const Matrix& d);
};

/// Thin-QR orthonormal factor of a, with R's diagonal forced positive so the
/// factor is unique. Throws NumericalError when a is rank deficient.
Matrix qr_orthonormal_factor(const Matrix& a);

/// QR retraction: the orthonormal factor of W + D. retract(W, 0) == W exactly;
/// first-order consistent with W + D for tangent D. Throws NumericalError when
/// W + D is rank deficient (caller should shrink the step).
StiefelPoint retract(const StiefelPoint& w, const Matrix& d);

}  // namespace fedep
