#include "fedep/matrix.hpp"

#include <cmath>
#include <sstream>

namespace fedep {

bool all_finite(const Matrix& a) { return a.allFinite(); }

void require_finite(const Matrix& a, const char* context) {
    if (!a.allFinite()) {
        throw NumericalError(std::string(context) + ": non-finite entries");
    }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* context) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        std::ostringstream msg;
        msg << context << ": shape mismatch (" << a.rows() << "x" << a.cols()
            << " vs " << b.rows() << "x" << b.cols() << ")";
        throw ShapeError(msg.str());
    }
}

double l1_norm(const Matrix& a) { return a.cwiseAbs().sum(); }

double l21_norm(const Matrix& a) {
    double total = 0.0;
    for (Index r = 0; r < a.rows(); ++r) {
        total += a.row(r).norm();
    }
    return total;
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "frobenius_inner");
    return a.cwiseProduct(b).sum();
}

Matrix soft_threshold(const Matrix& m, double tau) {
    if (tau < 0.0) {
        throw std::invalid_argument("soft_threshold: tau must be nonnegative");
    }
    return m.unaryExpr([tau](double v) {
        double shrunk = std::abs(v) - tau;
        return shrunk > 0.0 ? (v > 0.0 ? shrunk : -shrunk) : 0.0;
    });
}

Matrix prox_l21(const Matrix& m, double tau) {
    if (tau < 0.0) {
        throw std::invalid_argument("prox_l21: tau must be nonnegative");
    }
    Matrix out = Matrix::Zero(m.rows(), m.cols());
    for (Index r = 0; r < m.rows(); ++r) {
        double norm = m.row(r).norm();
        if (norm > tau) {
            out.row(r) = (1.0 - tau / norm) * m.row(r);
        }
    }
    return out;
}

Matrix sym(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw ShapeError("sym: matrix must be square");
    }
    return 0.5 * (a + a.transpose());
}

}  // namespace fedep
