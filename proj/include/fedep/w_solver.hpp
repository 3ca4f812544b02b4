#pragma once

#include "fedep/matrix.hpp"
#include "fedep/stiefel.hpp"

#include <functional>
#include <string>
#include <vector>

namespace fedep {

/// One per-client subproblem on St(n, m):
///
///   min_W  ||U - W W^T U||_F^2 + (nu/2) ||W - Z||_F^2 + beta ||W||_{2,1}
///
/// solved by proximal gradient steps on the manifold: at each iterate the
/// descent direction comes from a tangent-constrained prox subproblem whose
/// multiplier system Q(theta) = 0 is solved by a regularized semi-smooth
/// Newton method, followed by a backtracking retraction line search.
struct WSubproblemInput {
    Matrix u;       // n x p, purified data this round
    Matrix z;       // n x m, consensus anchor V - Pi/nu
    double beta = 0.0;
    double nu = 1.0;
    double t = 0.0;  // proximal step size; <= 0 selects the power-iteration default
    double gamma = 0.5;
    int t_max = 5;
    double ssn_tol = 1e-8;
    int ssn_max_iter = 50;

    void validate(Index n, Index m) const;
};

/// Symmetric m x m multiplier of the tangent-space constraint.
struct SsnMultiplier {
    Matrix theta;

    explicit SsnMultiplier(Matrix t);
};

/// 1/(2*lambda_max(U U^T) + nu), lambda_max estimated with five
/// deterministic power-iteration steps. A Lipschitz-type bound for grad H.
double default_step_size(const Matrix& u, double nu);

/// H(W) = ||U - W W^T U||_F^2 + (nu/2) ||W - Z||_F^2.
double smooth_objective_H(const StiefelPoint& w, const WSubproblemInput& in);

/// F(W) = H(W) + beta ||W||_{2,1}.
double full_objective_F(const StiefelPoint& w, const WSubproblemInput& in);

/// grad H(W) = -2 U U^T W + nu (W - Z), valid on the manifold.
Matrix euclidean_gradient(const StiefelPoint& w, const WSubproblemInput& in);

/// D(theta) = prox_{2,1}(B(theta), t*beta) - W with
/// B(theta) = W - t*(grad - W*theta).
Matrix direction_from_multiplier(const SsnMultiplier& theta, const StiefelPoint& w,
                                 const Matrix& grad, const WSubproblemInput& in);

/// Q(theta) = D(theta)^T W + W^T D(theta); the root defines the direction.
Matrix constraint_residual_Q(const SsnMultiplier& theta, const StiefelPoint& w,
                             const Matrix& grad, const WSubproblemInput& in);

struct SsnResult {
    SsnMultiplier theta;
    Matrix direction;
    double residual_norm = 0.0;
    int newton_steps = 0;
    bool used_fallback = false;
};

/// Solves Q(theta) = 0 for the symmetric multiplier, regularized Newton with a
/// fixed-point fallback when the system is singular. Warm-started at
/// sym(W^T grad), the exact root of the beta = 0 case. Throws NumericalError
/// (carrying the last residual) when ssn_max_iter is exhausted.
SsnResult ssn_solve(const StiefelPoint& w, const Matrix& grad, const WSubproblemInput& in);

struct LineSearchResult {
    StiefelPoint point;
    double step = 1.0;
    int shrink_count = 0;
};

/// Backtracking retraction line search: largest a in {1, gamma, gamma^2, ...}
/// with F(Retr_W(a D)) <= F(W) - (a/2t) ||D||_F^2. Throws NumericalError once
/// a underflows 1e-12 (stalled descent).
LineSearchResult line_search_step(const StiefelPoint& w, const Matrix& d,
                                  const WSubproblemInput& in,
                                  const std::function<double(const StiefelPoint&)>& full_objective);

struct WSolveReport {
    int iterations = 0;
    bool stalled = false;
    std::string warning;
    std::vector<double> objective_trace;  // F at w0 and after each accepted step
};

/// T_max rounds of {gradient -> ssn_solve -> line search}. Monotone in F by
/// construction; on stalled descent or repeated SSN failure it stops early,
/// records a warning, and returns the best iterate so far.
StiefelPoint solve_w_subproblem(const StiefelPoint& w0, const WSubproblemInput& in,
                                WSolveReport* report = nullptr);

}  // namespace fedep
