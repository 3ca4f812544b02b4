#pragma once

#include "fedep/client.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fedep {

/// Per-round telemetry record.
struct RoundRecord {
    int round = 0;
    double lagrangian = 0.0;
    double consensus_gap_max = 0.0;   // max_i ||W_i - V||_F
    double consensus_gap_mean = 0.0;  // mean_i ||W_i - V||_F
    double duration_ms = 0.0;
    std::optional<double> eval_acc;
    std::optional<double> eval_f1;

    std::string to_json_line() const;
};

/// The simulated federation: d client states plus the consensus variable.
/// V is kept in two forms: the raw arithmetic mean of the client bases (the
/// quantity the ADMM algebra, anchors, and multiplier updates use) and a
/// QR-projected copy for evaluation and reporting, where V itself acts as a
/// projector.
class FederationRun {
   public:
    FederationRun(std::vector<ClientState> clients, HyperParams hp);

    /// Rebuild a run from checkpointed state.
    static FederationRun restore(std::vector<ClientState> clients, HyperParams hp, Matrix v_raw,
                                 int round, std::vector<RoundRecord> history,
                                 double initial_lagrangian);

    const std::vector<ClientState>& clients() const { return clients_; }
    const HyperParams& hp() const { return hp_; }
    const Matrix& v_raw() const { return v_raw_; }
    StiefelPoint v_projected() const;
    int round() const { return round_; }
    const std::vector<RoundRecord>& history() const { return history_; }
    double initial_lagrangian() const { return initial_lagrangian_; }

    Index feature_dim() const { return clients_.front().feature_dim(); }
    Index rank() const { return clients_.front().rank(); }
    int client_count() const { return static_cast<int>(clients_.size()); }

   private:
    std::vector<ClientState> clients_;
    HyperParams hp_;
    Matrix v_raw_;
    int round_ = 0;
    std::vector<RoundRecord> history_;
    double initial_lagrangian_ = 0.0;

    friend void run_round(FederationRun& run, const struct FederationOptions& opts);
};

struct FederationOptions {
    /// 0 resolves to min(hardware, FEDEP_THREADS, d); 1 forces serial.
    int threads = 0;
    /// When set, one JSON object per round is appended.
    std::ostream* telemetry = nullptr;
    /// Called with the last good state when a round aborts (checkpoint hook).
    std::function<void(const FederationRun&)> on_abort;
    /// Optional per-round evaluation, returns (accuracy, f1).
    std::function<std::pair<double, double>(const FederationRun&)> round_eval;
};

/// Raw arithmetic mean of the client bases, summed in ascending client-id
/// order (exact permutation invariance).
Matrix mean_basis(const std::vector<ClientState>& clients);

/// Mean of the client bases projected back to the manifold via QR; returns
/// W_1 exactly when d = 1. Throws NumericalError when the mean is rank
/// deficient (clients collapsed onto complementary subspaces).
StiefelPoint aggregate_V(const std::vector<ClientState>& clients);

/// Sum of the per-client augmented Lagrangians against the current raw V.
double global_lagrangian(const FederationRun& run);

/// One global round: parallel primal client updates against the current V,
/// aggregation, then dual updates against the new V. No-op once
/// round >= K_max. Commits atomically; an aggregation failure leaves the run
/// at the last good state.
void run_round(FederationRun& run, const FederationOptions& opts = {});

/// Rounds until K_max, or early stop when the relative per-round decrease of
/// the global Lagrangian stays below hp.epsilon for 3 consecutive rounds
/// (disabled when epsilon = 0).
void run_to_completion(FederationRun& run, const FederationOptions& opts = {});

struct MonotonicityReport {
    struct Violation {
        int round;
        double before;
        double after;
    };
    std::vector<Violation> violations;
    bool pass() const { return violations.empty(); }
};

/// Flags every round where L^{k+1} > L^k + tol_scale*(1 + |L^k|). When
/// initial_lagrangian is supplied the first recorded round is checked against
/// it as well.
MonotonicityReport monotonicity_check(const std::vector<RoundRecord>& history,
                                      double tol_scale = 1e-6,
                                      std::optional<double> initial_lagrangian = std::nullopt);

/// Thread-count resolution honoring the FEDEP_THREADS env var.
int resolve_thread_count(int requested, int client_count);

}  // namespace fedep
