#include "fedep/w_solver.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace fedep {

namespace {

// Effective proximal step: explicit when positive, otherwise the
// power-iteration default.
double effective_step(const WSubproblemInput& in) {
    return in.t > 0.0 ? in.t : default_step_size(in.u, in.nu);
}

// Row-wise generalized Jacobian of prox_{2,1}(., tau) at base, applied to
// direction. Rows in the shrunk-to-zero regime contribute zero blocks.
Matrix prox_l21_jacobian_apply(const Matrix& base, double tau, const Matrix& direction) {
    if (tau == 0.0) {
        return direction;
    }
    Matrix out = Matrix::Zero(direction.rows(), direction.cols());
    for (Index r = 0; r < base.rows(); ++r) {
        double norm = base.row(r).norm();
        if (norm <= tau) {
            continue;
        }
        double dot = base.row(r).dot(direction.row(r));
        out.row(r) = (1.0 - tau / norm) * direction.row(r) +
                     (tau / (norm * norm * norm)) * dot * base.row(r);
    }
    return out;
}

// Orthonormal basis of symmetric m x m matrices: E_aa = e_a e_a^T and
// E_ab = (e_a e_b^T + e_b e_a^T)/sqrt(2) for a < b.
Matrix sym_basis_element(Index m, Index a, Index b) {
    Matrix e = Matrix::Zero(m, m);
    if (a == b) {
        e(a, a) = 1.0;
    } else {
        const double s = 1.0 / std::sqrt(2.0);
        e(a, b) = s;
        e(b, a) = s;
    }
    return e;
}

Vector svec(const Matrix& s) {
    Index m = s.rows();
    Vector v(m * (m + 1) / 2);
    Index k = 0;
    const double root2 = std::sqrt(2.0);
    for (Index a = 0; a < m; ++a) {
        v(k++) = s(a, a);
        for (Index b = a + 1; b < m; ++b) {
            v(k++) = root2 * s(a, b);
        }
    }
    return v;
}

Matrix unsvec(const Vector& v, Index m) {
    Matrix s(m, m);
    Index k = 0;
    const double inv_root2 = 1.0 / std::sqrt(2.0);
    for (Index a = 0; a < m; ++a) {
        s(a, a) = v(k++);
        for (Index b = a + 1; b < m; ++b) {
            double x = v(k++) * inv_root2;
            s(a, b) = x;
            s(b, a) = x;
        }
    }
    return s;
}

}  // namespace

void WSubproblemInput::validate(Index n, Index m) const {
    if (u.rows() != n) {
        throw ShapeError("WSubproblemInput: U row count does not match ambient dim");
    }
    if (z.rows() != n || z.cols() != m) {
        throw ShapeError("WSubproblemInput: Z shape does not match W");
    }
    if (beta < 0.0) throw std::invalid_argument("WSubproblemInput: beta must be >= 0");
    if (nu <= 0.0) throw std::invalid_argument("WSubproblemInput: nu must be > 0");
    if (gamma <= 0.0 || gamma >= 1.0) {
        throw std::invalid_argument("WSubproblemInput: gamma must lie in (0,1)");
    }
    if (t_max < 0) throw std::invalid_argument("WSubproblemInput: T_max must be >= 0");
    if (ssn_tol <= 0.0) throw std::invalid_argument("WSubproblemInput: ssn_tol must be > 0");
    if (ssn_max_iter < 1) throw std::invalid_argument("WSubproblemInput: ssn_max_iter must be >= 1");
}

SsnMultiplier::SsnMultiplier(Matrix t) : theta(std::move(t)) {
    if (theta.rows() != theta.cols()) {
        throw ShapeError("SsnMultiplier: theta must be square");
    }
    double asym = (theta - theta.transpose()).norm() * 0.5;
    if (asym > 1e-12) {
        throw NumericalError("SsnMultiplier: theta not symmetric", asym);
    }
}

double default_step_size(const Matrix& u, double nu) {
    // Five power-iteration steps on U U^T from a fixed start vector.
    Index n = u.rows();
    Vector v = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    double lambda = 0.0;
    for (int it = 0; it < 5; ++it) {
        Vector w = u * (u.transpose() * v);
        double norm = w.norm();
        if (norm <= 0.0) {
            lambda = 0.0;
            break;
        }
        v = w / norm;
        lambda = v.dot(u * (u.transpose() * v));
    }
    return 1.0 / (2.0 * lambda + nu);
}

double smooth_objective_H(const StiefelPoint& w, const WSubproblemInput& in) {
    in.validate(w.ambient_dim(), w.subspace_dim());
    const Matrix& wb = w.basis();
    Matrix residual = in.u - wb * (wb.transpose() * in.u);
    return residual.squaredNorm() + 0.5 * in.nu * (wb - in.z).squaredNorm();
}

double full_objective_F(const StiefelPoint& w, const WSubproblemInput& in) {
    return smooth_objective_H(w, in) + in.beta * l21_norm(w.basis());
}

Matrix euclidean_gradient(const StiefelPoint& w, const WSubproblemInput& in) {
    in.validate(w.ambient_dim(), w.subspace_dim());
    const Matrix& wb = w.basis();
    return -2.0 * (in.u * (in.u.transpose() * wb)) + in.nu * (wb - in.z);
}

Matrix direction_from_multiplier(const SsnMultiplier& theta, const StiefelPoint& w,
                                 const Matrix& grad, const WSubproblemInput& in) {
    require_same_shape(w.basis(), grad, "direction_from_multiplier");
    if (theta.theta.rows() != w.subspace_dim()) {
        throw ShapeError("direction_from_multiplier: theta dimension mismatch");
    }
    double t = effective_step(in);
    Matrix b = w.basis() - t * (grad - w.basis() * theta.theta);
    return prox_l21(b, t * in.beta) - w.basis();
}

Matrix constraint_residual_Q(const SsnMultiplier& theta, const StiefelPoint& w,
                             const Matrix& grad, const WSubproblemInput& in) {
    Matrix d = direction_from_multiplier(theta, w, grad, in);
    return d.transpose() * w.basis() + w.basis().transpose() * d;
}

SsnResult ssn_solve(const StiefelPoint& w, const Matrix& grad, const WSubproblemInput& in) {
    require_same_shape(w.basis(), grad, "ssn_solve");
    const Matrix& wb = w.basis();
    Index m = w.subspace_dim();
    double t = effective_step(in);
    double tau = t * in.beta;

    auto residual_at = [&](const Matrix& theta_mat) {
        Matrix b = wb - t * (grad - wb * theta_mat);
        Matrix d = prox_l21(b, tau) - wb;
        Matrix q = d.transpose() * wb + wb.transpose() * d;
        return std::make_pair(std::move(q), std::move(b));
    };

    // Warm start: the exact root when beta = 0.
    Matrix theta = sym(wb.transpose() * grad);
    auto [q, b] = residual_at(theta);
    double q_norm = q.norm();

    SsnResult result{SsnMultiplier(theta), Matrix(), q_norm, 0, false};
    Index dim = m * (m + 1) / 2;

    for (int iter = 0; iter < in.ssn_max_iter && q_norm > in.ssn_tol; ++iter) {
        // Assemble the generalized Jacobian of Q on the symmetric basis. The
        // operator dtheta -> 2 sym(W^T Jprox(t W dtheta)) is self-adjoint PSD.
        Matrix k_mat(dim, dim);
        Index col = 0;
        for (Index a = 0; a < m; ++a) {
            for (Index bb = a; bb < m; ++bb) {
                Matrix e = sym_basis_element(m, a, bb);
                Matrix dd = prox_l21_jacobian_apply(b, tau, t * (wb * e));
                Matrix dq = dd.transpose() * wb + wb.transpose() * dd;
                k_mat.col(col++) = svec(dq);
            }
        }

        double reg = 1e-8 * (1.0 + q_norm);
        Matrix system = k_mat + reg * Matrix::Identity(dim, dim);
        Vector rhs = -svec(q);
        Vector x = system.ldlt().solve(rhs);

        bool newton_ok = x.allFinite();
        Matrix step;
        if (newton_ok) {
            step = unsvec(x, m);
        } else {
            step = -(0.5 / t) * q;  // fixed-point fallback, eta = 1/(2t)
            result.used_fallback = true;
        }

        // Keep ||Q|| monotone: halve the step while it does not improve.
        bool accepted = false;
        for (int halving = 0; halving < 30; ++halving) {
            Matrix trial = theta + step;
            auto [q_trial, b_trial] = residual_at(trial);
            double trial_norm = q_trial.norm();
            if (trial_norm < q_norm) {
                theta = std::move(trial);
                q = std::move(q_trial);
                b = std::move(b_trial);
                q_norm = trial_norm;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted && newton_ok) {
            // Newton direction made no progress; try the fixed-point map once.
            result.used_fallback = true;
            Matrix trial = theta - (0.5 / t) * q;
            auto [q_trial, b_trial] = residual_at(trial);
            if (q_trial.norm() < q_norm) {
                theta = std::move(trial);
                q = std::move(q_trial);
                b = std::move(b_trial);
                q_norm = q.norm();
                accepted = true;
            }
        }
        ++result.newton_steps;
        if (!accepted) {
            break;  // no progress possible; report non-convergence below
        }
    }

    if (q_norm > in.ssn_tol) {
        std::ostringstream msg;
        msg << "ssn_solve: no convergence within " << in.ssn_max_iter
            << " iterations (residual " << q_norm << ")";
        throw NumericalError(msg.str(), q_norm);
    }

    result.theta = SsnMultiplier(sym(theta));
    result.direction = prox_l21(b, tau) - wb;
    result.residual_norm = q_norm;
    return result;
}

LineSearchResult line_search_step(const StiefelPoint& w, const Matrix& d,
                                  const WSubproblemInput& in,
                                  const std::function<double(const StiefelPoint&)>& full_objective) {
    require_same_shape(w.basis(), d, "line_search_step");
    if (d.isZero(0.0)) {
        throw std::invalid_argument("line_search_step: direction must be nonzero");
    }
    double t = effective_step(in);
    double f_base = full_objective(w);
    double d_sq = d.squaredNorm();

    double a = 1.0;
    int shrinks = 0;
    while (a >= 1e-12) {
        bool retract_ok = true;
        StiefelPoint candidate = w;
        try {
            candidate = retract(w, a * d);
        } catch (const NumericalError&) {
            retract_ok = false;  // degenerate step, shrink and retry
        }
        if (retract_ok) {
            double f_cand = full_objective(candidate);
            if (f_cand <= f_base - (a / (2.0 * t)) * d_sq) {
                return LineSearchResult{std::move(candidate), a, shrinks};
            }
        }
        a *= in.gamma;
        ++shrinks;
    }
    throw NumericalError("line_search_step: stalled descent (step underflow)", a);
}

StiefelPoint solve_w_subproblem(const StiefelPoint& w0, const WSubproblemInput& in,
                                WSolveReport* report) {
    in.validate(w0.ambient_dim(), w0.subspace_dim());
    double t_base = effective_step(in);

    auto objective = [&in](const StiefelPoint& w) { return full_objective_F(w, in); };

    StiefelPoint w = w0;
    WSolveReport local;
    local.objective_trace.push_back(objective(w));

    for (int j = 0; j < in.t_max; ++j) {
        Matrix grad = euclidean_gradient(w, in);

        WSubproblemInput trial = in;
        trial.t = t_base;
        SsnResult ssn{SsnMultiplier(Matrix::Zero(w.subspace_dim(), w.subspace_dim())),
                      Matrix(), 0.0, 0, false};
        bool ssn_ok = false;
        for (int attempt = 0; attempt < 10; ++attempt) {
            try {
                ssn = ssn_solve(w, grad, trial);
                ssn_ok = true;
                break;
            } catch (const NumericalError&) {
                trial.t *= 0.5;  // smaller step makes the prox better conditioned
            }
        }
        if (!ssn_ok) {
            local.stalled = true;
            local.warning = "ssn_solve failed to converge; keeping current iterate";
            break;
        }

        if (ssn.direction.norm() <= 1e-13 * (1.0 + w.basis().norm())) {
            break;  // stationary
        }

        try {
            LineSearchResult ls = line_search_step(w, ssn.direction, trial, objective);
            w = std::move(ls.point);
        } catch (const NumericalError&) {
            local.stalled = true;
            local.warning = "line search stalled; keeping current iterate";
            break;
        }
        ++local.iterations;
        local.objective_trace.push_back(objective(w));
    }

    if (report != nullptr) {
        *report = std::move(local);
    }
    return w;
}

}  // namespace fedep
