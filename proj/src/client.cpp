#include "fedep/client.hpp"

#include <Eigen/SVD>

#include <stdexcept>
#include <utility>

namespace fedep {

std::string to_string(AblationCase c) {
    switch (c) {
        case AblationCase::case1: return "case1";
        case AblationCase::case2: return "case2";
        case AblationCase::case3: return "case3";
        case AblationCase::case4: return "case4";
    }
    return "case4";
}

AblationCase ablation_from_string(const std::string& s) {
    if (s == "case1") return AblationCase::case1;
    if (s == "case2") return AblationCase::case2;
    if (s == "case3") return AblationCase::case3;
    if (s == "case4") return AblationCase::case4;
    throw ConfigError("unknown ablation case: " + s);
}

void HyperParams::validate() const {
    if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
    if (beta < 0.0) throw ConfigError("beta must be >= 0");
    if (mu <= 0.0) throw ConfigError("mu must be > 0");
    if (nu <= 0.0) throw ConfigError("nu must be > 0");
    if (rank < 1) throw ConfigError("rank must be >= 1");
    if (gamma <= 0.0 || gamma >= 1.0) throw ConfigError("gamma must lie in (0,1)");
    if (t_max < 0) throw ConfigError("T_max must be >= 0");
    if (ssn_tol <= 0.0) throw ConfigError("ssn_tol must be > 0");
    if (ssn_max_iter < 1) throw ConfigError("ssn_max_iter must be >= 1");
    if (k_max < 0) throw ConfigError("K_max must be >= 0");
    if (epsilon < 0.0) throw ConfigError("epsilon must be >= 0");
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, int id) {
    return seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(id + 1);
}

StiefelPoint initial_basis(const Matrix& x, int rank, std::uint64_t seed, int id) {
    Index n = x.rows();
    Index p = x.cols();
    if (rank > n) {
        throw ConfigError("rank exceeds feature dimension");
    }
    if (p < rank) {
        return StiefelPoint::random(n, rank, mix_seed(seed, id));
    }
    Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU);
    return StiefelPoint::orthonormalize(svd.matrixU().leftCols(rank));
}

}  // namespace

ClientState ClientState::initialize(int id, Matrix x, const HyperParams& hp, std::uint64_t seed) {
    hp.validate();
    if (x.rows() < 1 || x.cols() < 1) {
        throw ShapeError("ClientState: X must be nonempty");
    }
    require_finite(x, "ClientState::initialize");

    StiefelPoint w0 = initial_basis(x, hp.rank, seed, id);
    Index n = x.rows();
    Index p = x.cols();
    ClientState state{id, Matrix(), w0, Matrix::Zero(n, p), Matrix(), Matrix::Zero(n, p),
                      Matrix::Zero(n, hp.rank)};
    state.u = x;
    state.x = std::move(x);
    return state;
}

Matrix update_S(const ClientState& state, const HyperParams& hp) {
    if (!hp.s_enabled()) {
        return Matrix::Zero(state.x.rows(), state.x.cols());
    }
    Matrix m = state.x - state.u + state.lambda / hp.mu;
    return soft_threshold(m, hp.effective_alpha() / hp.mu);
}

Matrix update_U(const ClientState& state, const HyperParams& hp) {
    Matrix y = state.x - state.s + state.lambda / hp.mu;
    const Matrix& wb = state.w.basis();
    double c = hp.mu + 2.0;
    return (hp.mu / c) * y + (2.0 / c) * (wb * (wb.transpose() * y));
}

std::pair<Matrix, Matrix> update_multipliers(const ClientState& state, const Matrix& v,
                                             const HyperParams& hp) {
    require_same_shape(state.w.basis(), v, "update_multipliers");
    Matrix lambda = state.lambda - hp.mu * (state.x - state.s - state.u);
    Matrix pi = state.pi - hp.nu * (state.w.basis() - v);
    return {std::move(lambda), std::move(pi)};
}

void local_round(ClientState& state, const Matrix& v_anchor, const HyperParams& hp,
                 WSolveReport* report) {
    hp.validate();
    require_same_shape(state.w.basis(), v_anchor, "local_round");

    // Stage every update, then commit; an exception leaves the state intact.
    ClientState staged = state;

    WSubproblemInput in;
    in.u = staged.u;
    in.z = v_anchor - staged.pi / hp.nu;
    in.beta = hp.effective_beta();
    in.nu = hp.nu;
    in.t = hp.t;
    in.gamma = hp.gamma;
    in.t_max = hp.t_max;
    in.ssn_tol = hp.ssn_tol;
    in.ssn_max_iter = hp.ssn_max_iter;

    staged.w = solve_w_subproblem(staged.w, in, report);
    staged.s = update_S(staged, hp);
    staged.u = update_U(staged, hp);

    state = std::move(staged);
}

void apply_multiplier_updates(ClientState& state, const Matrix& v, const HyperParams& hp) {
    auto [lambda, pi] = update_multipliers(state, v, hp);
    state.lambda = std::move(lambda);
    state.pi = std::move(pi);
}

double local_lagrangian(const ClientState& state, const Matrix& v, const HyperParams& hp) {
    require_same_shape(state.w.basis(), v, "local_lagrangian");
    const Matrix& wb = state.w.basis();

    Matrix projection_residual = state.u - wb * (wb.transpose() * state.u);
    Matrix feasibility = state.x - state.s - state.u;
    Matrix consensus = wb - v;

    double value = projection_residual.squaredNorm();
    value += hp.effective_alpha() * l1_norm(state.s);
    value += hp.effective_beta() * l21_norm(wb);
    value += frobenius_inner(state.lambda, feasibility);
    value += 0.5 * hp.mu * feasibility.squaredNorm();
    value += frobenius_inner(state.pi, consensus);
    value += 0.5 * hp.nu * consensus.squaredNorm();
    return value;
}

}  // namespace fedep
