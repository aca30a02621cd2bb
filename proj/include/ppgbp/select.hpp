#pragma once

#include "ppgbp/types.hpp"

#include <string>
#include <vector>

namespace ppgbp::select {

struct FeatureMatrix {
    Mat x;  // rows = records, cols = features
    Vec y;  // regression target
    std::vector<std::string> column_names;

    void validate() const;  // no NaN, >= 10 rows, shapes consistent
};

/// RReliefF (regression ReliefF) weight per feature, in [-1, 1]. Features
/// and target are min-max normalized internally; neighbor influence is a
/// plain 1/k average. n_iterations < 0 or >= N runs an exhaustive instance
/// pass (deterministic, seed unused); otherwise instances are sampled
/// without replacement with the given seed.
Vec rrelieff(const FeatureMatrix& m, int k_neighbors = 10,
             int n_iterations = -1, std::uint64_t seed = 0);

/// Correlation-based feature selection: greedy forward search on the merit
/// k*r_cf / sqrt(k + k(k-1)*r_ff). Returns chosen column indices in
/// insertion order; merits (per step) optionally reported.
std::vector<int> cfs_select(const FeatureMatrix& m,
                            std::vector<double>* merits = nullptr);

struct MrmrResult {
    std::vector<int> ranked;     // first = most relevant
    std::vector<double> scores;  // greedy objective at selection time
};

/// Minimum-redundancy maximum-relevance ranking (MID scheme) on
/// equal-frequency discretized data; mutual information in bits.
MrmrResult mrmr_rank(const FeatureMatrix& m, int n_select, int bins = 8);

/// Indices of the k largest weights, in rank order; ties resolve to the
/// lower column index.
std::vector<int> select_top_k(const Eigen::Ref<const Vec>& weights, int k);

struct SelectionResult {
    std::string method;        // relieff | cfs | mrmr
    std::vector<int> ranked;   // permutation prefix, best first
    Vec weights;               // method-specific scale, per column
    std::vector<int> chosen;
};

/// Runs one method with its conventional sizing (top-k for relieff/mrmr,
/// self-sizing for cfs).
SelectionResult run_method(const FeatureMatrix& m, const std::string& method,
                           int n_select, int relieff_k_neighbors = 10,
                           int mrmr_bins = 8);

}  // namespace ppgbp::select
