#include "fedep/detect.hpp"

#include "fedep/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedep {

void ScoredDataset::validate() const {
    if (scores.empty() || scores.size() != labels.size()) {
        throw std::invalid_argument("ScoredDataset: scores/labels must be nonempty and aligned");
    }
    for (double s : scores) {
        if (!std::isfinite(s) || s < 0.0) {
            throw std::invalid_argument("ScoredDataset: scores must be finite and nonnegative");
        }
    }
    for (int l : labels) {
        if (l != 0 && l != 1) {
            throw std::invalid_argument("ScoredDataset: labels must be 0/1");
        }
    }
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
    tp += other.tp;
    tn += other.tn;
    fp += other.fp;
    fn += other.fn;
    return *this;
}

double reconstruction_score(const Vector& x, const StiefelPoint& w) {
    if (x.size() != w.ambient_dim()) {
        throw ShapeError("reconstruction_score: dimension mismatch");
    }
    Vector residual = x - w.basis() * (w.basis().transpose() * x);
    return residual.squaredNorm();
}

double select_threshold(const std::vector<double>& train_scores, const ThresholdSpec& spec) {
    if (train_scores.empty()) {
        throw std::invalid_argument("select_threshold: empty score set");
    }
    if (spec.policy == ThresholdPolicy::best_f1) {
        throw std::invalid_argument("select_threshold: best_f1 needs a labeled validation set");
    }
    if (spec.q < 0.0 || spec.q > 100.0) {
        throw std::invalid_argument("select_threshold: percentile out of range");
    }
    std::vector<double> sorted = train_scores;
    std::sort(sorted.begin(), sorted.end());
    auto n = static_cast<long>(sorted.size());
    long rank = static_cast<long>(std::ceil(spec.q / 100.0 * static_cast<double>(n)));
    rank = std::clamp(rank, 1L, n);
    return sorted[static_cast<size_t>(rank - 1)];
}

double select_threshold_best_f1(const ScoredDataset& validation) {
    validation.validate();
    std::vector<double> sorted = validation.scores;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    std::vector<double> candidates;
    candidates.push_back(sorted.front() - 1.0);  // predict everything attack
    for (size_t i = 0; i + 1 < sorted.size(); ++i) {
        candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
    }
    candidates.push_back(sorted.back());  // predict everything normal

    double best_threshold = candidates.front();
    double best_f1 = -1.0;
    for (double threshold : candidates) {
        MetricSet m = metrics(confusion(validation, threshold));
        double f1 = m.f1.value_or(-1.0);
        if (f1 > best_f1) {
            best_f1 = f1;
            best_threshold = threshold;
        }
    }
    return best_threshold;
}

ConfusionCounts confusion(const ScoredDataset& scored, double threshold) {
    scored.validate();
    ConfusionCounts c;
    for (size_t i = 0; i < scored.scores.size(); ++i) {
        bool predicted_attack = scored.scores[i] > threshold;
        bool is_attack = scored.labels[i] == 1;
        if (predicted_attack && is_attack) ++c.tp;
        else if (predicted_attack && !is_attack) ++c.fp;
        else if (!predicted_attack && is_attack) ++c.fn;
        else ++c.tn;
    }
    return c;
}

MetricSet metrics(const ConfusionCounts& c) {
    MetricSet m;
    auto ratio = [](long num, long den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.acc = ratio(c.tp + c.tn, c.total());
    m.pre = ratio(c.tp, c.tp + c.fp);
    m.rec = ratio(c.tp, c.tp + c.fn);
    m.fnr = ratio(c.fn, c.tp + c.fn);
    m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
    return m;
}

RocCurve roc_auc(const ScoredDataset& scored) {
    scored.validate();
    long n_pos = 0, n_neg = 0;
    for (int l : scored.labels) {
        (l == 1 ? n_pos : n_neg) += 1;
    }
    if (n_pos == 0 || n_neg == 0) {
        throw DataError("roc_auc: both classes must be present");
    }

    std::vector<size_t> order(scored.scores.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return scored.scores[a] > scored.scores[b];
    });

    RocCurve curve;
    curve.points.emplace_back(0.0, 0.0);
    long tp = 0, fp = 0;
    double auc = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        // Group tied scores so ties trace one diagonal segment (midpoint rule).
        double score = scored.scores[order[i]];
        long group_pos = 0, group_neg = 0;
        while (i < order.size() && scored.scores[order[i]] == score) {
            (scored.labels[order[i]] == 1 ? group_pos : group_neg) += 1;
            ++i;
        }
        double fpr_before = static_cast<double>(fp) / static_cast<double>(n_neg);
        double tpr_before = static_cast<double>(tp) / static_cast<double>(n_pos);
        tp += group_pos;
        fp += group_neg;
        double fpr_after = static_cast<double>(fp) / static_cast<double>(n_neg);
        double tpr_after = static_cast<double>(tp) / static_cast<double>(n_pos);
        auc += (fpr_after - fpr_before) * 0.5 * (tpr_before + tpr_after);
        curve.points.emplace_back(fpr_after, tpr_after);
    }
    curve.auc = auc;
    return curve;
}

Vector feature_importance(const StiefelPoint& w) {
    return w.basis().cwiseAbs().rowwise().sum();
}

std::string to_string(EvalMode m) {
    return m == EvalMode::personalized ? "personalized" : "global";
}

EvalMode eval_mode_from_string(const std::string& s) {
    if (s == "personalized") return EvalMode::personalized;
    if (s == "global") return EvalMode::global;
    throw ConfigError("unknown eval mode: " + s);
}

namespace {

std::vector<double> score_columns(const Matrix& x, const StiefelPoint& w) {
    std::vector<double> scores;
    scores.reserve(static_cast<size_t>(x.cols()));
    for (Index j = 0; j < x.cols(); ++j) {
        scores.push_back(reconstruction_score(x.col(j), w));
    }
    return scores;
}

ScoredDataset score_rows(const TabularDataset& data, const StiefelPoint& w) {
    if (!data.labels) {
        throw DataError("evaluate_run: test shard has no labels");
    }
    ScoredDataset scored;
    scored.scores.reserve(static_cast<size_t>(data.x.rows()));
    scored.labels = *data.labels;
    for (Index r = 0; r < data.x.rows(); ++r) {
        Vector sample = data.x.row(r).transpose();
        scored.scores.push_back(reconstruction_score(sample, w));
    }
    return scored;
}

}  // namespace

EvalReport evaluate_run(const FederationRun& run, const std::vector<TabularDataset>& test_shards,
                        const EvalOptions& opts) {
    if (static_cast<int>(test_shards.size()) != run.client_count()) {
        throw DataError("evaluate_run: one test shard per client required");
    }
    if (opts.threshold.policy == ThresholdPolicy::best_f1 &&
        (opts.validation == nullptr ||
         static_cast<int>(opts.validation->size()) != run.client_count())) {
        throw DataError("evaluate_run: best_f1 policy needs per-client validation shards");
    }

    std::optional<StiefelPoint> v_global;
    if (opts.mode == EvalMode::global) {
        v_global = run.v_projected();
    }

    EvalReport report;
    report.mode = opts.mode;
    ScoredDataset pooled;

    for (int i = 0; i < run.client_count(); ++i) {
        const ClientState& client = run.clients()[static_cast<size_t>(i)];
        const StiefelPoint& w = opts.mode == EvalMode::personalized ? client.w : *v_global;

        ClientEval eval;
        eval.client_id = client.id;
        const TabularDataset& shard = test_shards[static_cast<size_t>(i)];
        if (shard.x.rows() == 0) {
            eval.skipped = true;
            report.per_client.push_back(std::move(eval));
            continue;
        }

        if (opts.threshold.policy == ThresholdPolicy::percentile) {
            eval.threshold = select_threshold(score_columns(client.x, w), opts.threshold);
        } else {
            eval.threshold =
                select_threshold_best_f1(score_rows((*opts.validation)[static_cast<size_t>(i)], w));
        }

        ScoredDataset scored = score_rows(shard, w);
        eval.n_samples = static_cast<long>(scored.n_samples());
        eval.counts = confusion(scored, eval.threshold);
        eval.m = metrics(eval.counts);
        bool has_pos = eval.counts.tp + eval.counts.fn > 0;
        bool has_neg = eval.counts.tn + eval.counts.fp > 0;
        if (has_pos && has_neg) {
            eval.auc = roc_auc(scored).auc;
        }
        report.pooled_counts += eval.counts;
        pooled.scores.insert(pooled.scores.end(), scored.scores.begin(), scored.scores.end());
        pooled.labels.insert(pooled.labels.end(), scored.labels.begin(), scored.labels.end());
        report.per_client.push_back(std::move(eval));
    }

    report.pooled = metrics(report.pooled_counts);
    bool pooled_pos = report.pooled_counts.tp + report.pooled_counts.fn > 0;
    bool pooled_neg = report.pooled_counts.tn + report.pooled_counts.fp > 0;
    if (!pooled.scores.empty() && pooled_pos && pooled_neg) {
        report.pooled_roc = roc_auc(pooled);
        report.pooled_auc = report.pooled_roc.auc;
    }
    return report;
}

}  // namespace fedep
