#include "fedep/stiefel.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace fedep {

StiefelPoint::StiefelPoint(Matrix basis) : basis_(std::move(basis)) {
    if (basis_.rows() < 1 || basis_.cols() < 1 || basis_.cols() > basis_.rows()) {
        std::ostringstream msg;
        msg << "StiefelPoint: invalid shape " << basis_.rows() << "x" << basis_.cols();
        throw ShapeError(msg.str());
    }
    require_finite(basis_, "StiefelPoint");
    double defect = orthonormality_defect();
    if (defect > kOrthTol) {
        throw NumericalError("StiefelPoint: columns not orthonormal", defect);
    }
}

double StiefelPoint::orthonormality_defect() const {
    Index m = basis_.cols();
    Matrix gram = basis_.transpose() * basis_;
    return (gram - Matrix::Identity(m, m)).norm();
}

Matrix qr_orthonormal_factor(const Matrix& a) {
    Index n = a.rows();
    Index m = a.cols();
    if (m > n) {
        throw ShapeError("qr_orthonormal_factor: more columns than rows");
    }
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(n, m);
    Matrix r = qr.matrixQR().topLeftCorner(m, m).triangularView<Eigen::Upper>();

    double scale = std::max(1.0, a.norm());
    for (Index j = 0; j < m; ++j) {
        double d = r(j, j);
        if (std::abs(d) <= 1e-12 * scale) {
            throw NumericalError("qr_orthonormal_factor: rank-deficient input", std::abs(d));
        }
        if (d < 0.0) {
            q.col(j) = -q.col(j);
        }
    }
    return q;
}

StiefelPoint StiefelPoint::orthonormalize(const Matrix& a) {
    return StiefelPoint(qr_orthonormal_factor(a), Unchecked{});
}

StiefelPoint StiefelPoint::random(Index n, Index m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix g(n, m);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < m; ++j) {
            g(i, j) = gauss(rng);
        }
    }
    return orthonormalize(g);
}

StiefelPoint retract(const StiefelPoint& w, const Matrix& d) {
    require_same_shape(w.basis(), d, "retract");
    if (d.isZero(0.0)) {
        return w;  // identity case, exact
    }
    return StiefelPoint(qr_orthonormal_factor(w.basis() + d), StiefelPoint::Unchecked{});
}

}  // namespace fedep
