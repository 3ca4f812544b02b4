#pragma once

#include "fedep/matrix.hpp"
#include "fedep/stiefel.hpp"
#include "fedep/w_solver.hpp"

#include <cstdint>
#include <string>
#include <utility>

namespace fedep {

/// The four ablation configurations: case1 drops both sparsity terms, case2
/// keeps only the elementwise S term, case3 keeps only the row-sparsity term
/// on W, case4 is the full objective.
enum class AblationCase { case1, case2, case3, case4 };

std::string to_string(AblationCase c);
AblationCase ablation_from_string(const std::string& s);

struct HyperParams {
    double alpha = 1.0;  // l1 weight on S
    double beta = 0.1;   // l21 weight on W
    double mu = 1.0;     // penalty for X - S = U
    double nu = 1.0;     // penalty for W = V
    int rank = 5;        // subspace dimension m

    // Forwarded to the W-solver.
    double t = 0.0;  // <= 0 selects the power-iteration default
    double gamma = 0.5;
    int t_max = 5;
    double ssn_tol = 1e-8;
    int ssn_max_iter = 50;

    int k_max = 30;        // global rounds
    double epsilon = 0.0;  // early-stop tolerance; 0 disables
    AblationCase ablation = AblationCase::case4;

    void validate() const;

    /// Whether the S variable participates (cases 2 and 4).
    bool s_enabled() const {
        return ablation == AblationCase::case2 || ablation == AblationCase::case4;
    }
    /// beta as seen by the W-solver (0 in cases 1 and 2).
    double effective_beta() const {
        return (ablation == AblationCase::case3 || ablation == AblationCase::case4) ? beta : 0.0;
    }
    /// alpha as seen by the S-update (irrelevant when S is pinned).
    double effective_alpha() const { return s_enabled() ? alpha : 0.0; }
};

/// One gateway's full ADMM state. X is fixed for the lifetime of the state;
/// everything else evolves round by round.
struct ClientState {
    int id = 0;
    Matrix x;        // n x p, features x local samples
    StiefelPoint w;  // n x m
    Matrix s;        // n x p
    Matrix u;        // n x p
    Matrix lambda;   // n x p, multiplier for X - S = U
    Matrix pi;       // n x m, multiplier for W = V

    Index feature_dim() const { return x.rows(); }
    Index sample_count() const { return x.cols(); }
    Index rank() const { return w.subspace_dim(); }

    /// W0 from the top-m left singular vectors of X (seeded Gaussian QR when
    /// p < m), S = 0, U = X, multipliers zero.
    static ClientState initialize(int id, Matrix x, const HyperParams& hp, std::uint64_t seed);
};

/// S <- soft_threshold(X - U + Lambda/mu, alpha/mu); the zero matrix when the
/// ablation pins S.
Matrix update_S(const ClientState& state, const HyperParams& hp);

/// U <- (mu/(mu+2)) Y + (2/(mu+2)) W (W^T Y) with Y = X - S + Lambda/mu, the
/// Sherman-Morrison-Woodbury closed form of (2(I - W W^T) + mu I) U = mu Y.
Matrix update_U(const ClientState& state, const HyperParams& hp);

/// Lambda <- Lambda - mu (X - S - U), Pi <- Pi - nu (W - V).
std::pair<Matrix, Matrix> update_multipliers(const ClientState& state, const Matrix& v,
                                             const HyperParams& hp);

/// The primal half of one local round: W-update (Z = V - Pi/nu), then S, then
/// U, committed atomically. Multiplier updates happen after the server has
/// aggregated the new V (update_multipliers), since the dual step uses the
/// fresh consensus point.
void local_round(ClientState& state, const Matrix& v_anchor, const HyperParams& hp,
                 WSolveReport* report = nullptr);

/// Applies update_multipliers in place.
void apply_multiplier_updates(ClientState& state, const Matrix& v, const HyperParams& hp);

/// L_i = ||(I - W W^T) U||_F^2 + alpha ||S||_1 + beta ||W||_{2,1}
///     + <Lambda, X - S - U> + (mu/2) ||X - S - U||_F^2
///     + <Pi, W - V> + (nu/2) ||W - V||_F^2,
/// with alpha and beta projected by the ablation case.
double local_lagrangian(const ClientState& state, const Matrix& v, const HyperParams& hp);

}  // namespace fedep
