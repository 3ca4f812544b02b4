#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace fedep {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Shape or dimension mismatch on a public interface.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure (rank deficiency, non-convergence, stalled descent).
/// Carries the last residual norm where one is meaningful.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what, double residual = 0.0)
        : std::runtime_error(what), residual(residual) {}
    double residual;
};

/// Problems with input data files (missing, malformed, schema violations).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Problems with experiment configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

bool all_finite(const Matrix& a);
void require_finite(const Matrix& a, const char* context);
void require_same_shape(const Matrix& a, const Matrix& b, const char* context);

/// Sum of absolute entries.
double l1_norm(const Matrix& a);

/// Sum of Euclidean norms of the rows.
double l21_norm(const Matrix& a);

/// Tr(A^T B); shapes must match.
double frobenius_inner(const Matrix& a, const Matrix& b);

/// Entrywise sign(m) * max(|m| - tau, 0). Proximal operator of tau*||.||_1.
Matrix soft_threshold(const Matrix& m, double tau);

/// Row-wise shrinkage max(0, 1 - tau/||row||) * row, zero rows map to zero.
/// Proximal operator of tau*||.||_{2,1}.
Matrix prox_l21(const Matrix& m, double tau);

/// (A + A^T)/2; A must be square.
Matrix sym(const Matrix& a);

}  // namespace fedep
