#pragma once

#include "fedep/federator.hpp"
#include "fedep/matrix.hpp"
#include "fedep/stiefel.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fedep {

struct TabularDataset;  // data_io.hpp

/// Per-sample reconstruction-error scores with binary labels (1 = attack).
struct ScoredDataset {
    std::vector<double> scores;
    std::vector<int> labels;

    size_t n_samples() const { return scores.size(); }
    void validate() const;
};

struct ConfusionCounts {
    long tp = 0;
    long tn = 0;
    long fp = 0;
    long fn = 0;

    long total() const { return tp + tn + fp + fn; }
    ConfusionCounts& operator+=(const ConfusionCounts& other);
};

/// Metrics with undefined values kept distinct from zero.
struct MetricSet {
    std::optional<double> acc;
    std::optional<double> pre;
    std::optional<double> rec;
    std::optional<double> fnr;
    std::optional<double> f1;
};

/// ||x - W (W^T x)||_2^2, the squared residual of projecting x onto span(W).
double reconstruction_score(const Vector& x, const StiefelPoint& w);

enum class ThresholdPolicy { percentile, best_f1 };

struct ThresholdSpec {
    ThresholdPolicy policy = ThresholdPolicy::percentile;
    double q = 95.0;  // percentile, nearest-rank convention
};

/// Nearest-rank percentile of the training scores. Throws on empty input.
double select_threshold(const std::vector<double>& train_scores, const ThresholdSpec& spec);

/// Threshold maximizing F1 on a labeled validation set, swept over all
/// midpoints between consecutive distinct scores (plus both extremes); the
/// smallest threshold wins ties.
double select_threshold_best_f1(const ScoredDataset& validation);

/// Predicted attack iff score > threshold (strict, deterministic at ties).
ConfusionCounts confusion(const ScoredDataset& scored, double threshold);

MetricSet metrics(const ConfusionCounts& c);

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (fpr, tpr)
    double auc = 0.0;
};

/// ROC over all distinct score thresholds, AUC by the trapezoidal rule (tied
/// scores grouped, midpoint convention). Throws DataError when only one class
/// is present.
RocCurve roc_auc(const ScoredDataset& scored);

/// Per-feature sum of |w_ij| over the basis columns.
Vector feature_importance(const StiefelPoint& w);

enum class EvalMode { personalized, global };

std::string to_string(EvalMode m);
EvalMode eval_mode_from_string(const std::string& s);

struct ClientEval {
    int client_id = 0;
    bool skipped = false;
    long n_samples = 0;
    double threshold = 0.0;
    ConfusionCounts counts;
    MetricSet m;
    std::optional<double> auc;
};

struct EvalReport {
    EvalMode mode = EvalMode::personalized;
    std::vector<ClientEval> per_client;
    ConfusionCounts pooled_counts;
    MetricSet pooled;
    std::optional<double> pooled_auc;
    RocCurve pooled_roc;
};

struct EvalOptions {
    EvalMode mode = EvalMode::personalized;
    ThresholdSpec threshold;
    /// Labeled per-client validation shards, required by the best_f1 policy.
    const std::vector<TabularDataset>* validation = nullptr;
};

/// Scores each client's test shard (personalized: with its own W_i; global:
/// with the projected V), selects per-client thresholds from that client's
/// training scores, and pools counts and ROC sample-weighted. Empty shards
/// are reported as skipped.
EvalReport evaluate_run(const FederationRun& run, const std::vector<TabularDataset>& test_shards,
                        const EvalOptions& opts);

}  // namespace fedep
