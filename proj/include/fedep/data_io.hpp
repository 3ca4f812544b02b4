#pragma once

#include "fedep/matrix.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fedep {

/// Declarative description of a delimited dataset: which column holds the
/// label, how to binarize it, which columns are categorical, and the non-IID
/// partition key.
struct DatasetSchema {
    std::string label_column;
    std::vector<std::string> normal_labels;    // map to 0, everything else 1
    std::vector<std::string> positive_labels;  // map to 1, everything else 0
    std::vector<std::string> categorical_columns;
    std::vector<std::string> drop_columns;
    std::string partition_key;
    char delimiter = ',';

    void validate() const;
    static DatasetSchema load(const std::string& path);
};

struct TabularDataset {
    std::vector<std::string> feature_names;
    Matrix x;  // samples x features
    std::optional<std::vector<int>> labels;

    struct Provenance {
        std::string source;
        long rows_read = 0;
        long rows_dropped = 0;
        std::vector<std::string> log;
    } provenance;

    Index n_samples() const { return x.rows(); }
    Index n_features() const { return x.cols(); }
};

/// Reads a delimited text file (UTF-8, first row header). Categorical columns
/// are one-hot encoded up to 8 levels and ordinal beyond that; labels are
/// binarized per the schema; rows with the wrong cell count or unparseable
/// numeric cells are dropped and counted.
TabularDataset ingest_csv(const std::string& path, const DatasetSchema& schema);

struct NormalizationModel {
    std::vector<double> mean;
    std::vector<double> stddev;          // population convention
    std::vector<bool> zero_variance;     // flagged features map to 0
};

/// Per-feature mean and standard deviation, computed on training data only.
NormalizationModel fit_zscore(const TabularDataset& train);

/// (x - mean)/stddev per feature; zero-variance features map to 0 identically.
TabularDataset apply_zscore(const NormalizationModel& model, const TabularDataset& data);

/// Stable sort by the key feature (ties by original index), then split into d
/// contiguous shards whose sizes differ by at most one.
std::vector<TabularDataset> partition_noniid(const TabularDataset& data, int d,
                                             const std::string& key_feature);

/// Low-rank-plus-sparse test fixture: shared orthonormal basis, dense
/// per-client coefficients, entrywise sparse outliers, Gaussian noise, and a
/// labeled test set with planted off-subspace anomalies. Seed-deterministic.
struct SyntheticSpec {
    Index n = 30;
    Index p = 200;
    int m_true = 5;
    int d = 5;
    double outlier_fraction = 0.05;
    double noise_sigma = 0.05;
    std::uint64_t seed = 1;

    // Test-set shape knobs (defaulted; not part of the core fixture contract).
    Index test_samples_per_client = 0;  // 0 -> p/2
    double test_anomaly_fraction = 0.3;
    double anomaly_scale = 15.0;

    void validate() const;
};

struct SyntheticData {
    std::vector<TabularDataset> train_shards;  // unlabeled
    std::vector<TabularDataset> test_shards;   // labeled, anomalies planted
    Matrix true_basis;                         // n x m_true, orthonormal
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace fedep
