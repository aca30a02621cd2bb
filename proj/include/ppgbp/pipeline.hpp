#pragma once

#include "ppgbp/dataset.hpp"
#include "ppgbp/features.hpp"
#include "ppgbp/fiducials.hpp"
#include "ppgbp/preprocess.hpp"
#include "ppgbp/regress.hpp"
#include "ppgbp/select.hpp"
#include "ppgbp/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ppgbp::pipeline {

inline constexpr const char* kVersion = "0.1.0";

struct QcConfig {
    double sqi_threshold = 0.0;
    std::optional<int> calibrate_target_kept;  // overrides the fixed threshold
};

struct SplitConfig {
    double test_fraction = 0.15;
    std::uint64_t seed = 0;
    bool by_subject = false;
};

struct SelectConfig {
    std::string method = "relieff";  // relieff | cfs | mrmr | none
    int n_select_sbp = 11;
    int n_select_dbp = 10;
    int mrmr_n_select = 13;
    int relieff_k_neighbors = 10;
    int mrmr_bins = 8;
};

struct TrainConfig {
    std::string model = "gpr";  // gpr | forest
    std::uint64_t seed = 0;
    int cv_folds = 10;
    regress::KernelSpec gpr;
    int forest_n_trees = 100;
    int forest_min_leaf = 8;
};

struct TuneConfig {
    int budget = 30;
    std::optional<std::uint64_t> seed;  // defaults to a train.seed derivative
    std::string acquisition = "ei";
};

struct PredictConfig {
    std::string split = "test";  // test | train | all
};

struct Config {
    std::filesystem::path signals_dir;
    std::filesystem::path subject_table;
    std::map<std::string, std::string> column_map;
    QcConfig qc;
    SplitConfig split;
    preprocess::Config preprocess;
    fiducials::Config fiducials;
    features::Config features;
    SelectConfig select;
    TrainConfig train;
    TuneConfig tune;
    PredictConfig predict;
    std::filesystem::path output_dir;

    static Config from_json_file(const std::filesystem::path& path);
    static Config from_json_text(const std::string& text);
    std::string to_canonical_json() const;
};

/// FNV-1a hash of the canonical config serialization; embedded in every
/// artifact for lineage checks.
std::string config_hash(const Config& cfg);

struct RunContext {
    Config cfg;
    int jobs = 1;
    std::optional<std::uint64_t> seed_override;  // --seed
    std::optional<std::string> target;           // --target sbp|dbp
    bool quiet = false;

    std::uint64_t split_seed() const;
    std::uint64_t train_seed() const;
    std::uint64_t tune_seed() const;
};

/// Dispatches one of: ingest, qc, extract, select, train, tune, predict,
/// evaluate, report. Throws ppgbp::Error on failure; returns 0 on success.
int run_subcommand(const std::string& name, const RunContext& ctx);

// ---------------------------------------------------------------------------
// Artifacts (exposed for tests and tools)

struct FeatureTable {
    std::string config_hash;
    std::vector<std::string> names;  // 107 feature columns
    Mat values;                      // rows x 107
    std::vector<std::string> subject_ids;
    std::vector<int> segment_ids;
    Vec sbp;
    Vec dbp;
};

FeatureTable read_features_csv(const std::filesystem::path& path);

struct PredictionRow {
    std::string target;
    std::string subject_id;
    int segment_id = 0;
    double actual = 0;
    double predicted = 0;
};

struct PredictionTable {
    std::string config_hash;
    std::vector<PredictionRow> rows;
};

PredictionTable read_predictions_csv(const std::filesystem::path& path);

struct LoadedModel {
    std::string type;  // gpr | forest
    std::string target;
    std::vector<int> selected_columns;
    std::vector<std::string> selected_names;
    regress::GprModel gpr;
    regress::TreeEnsemble forest;

    Vec predict(const Eigen::Ref<const Mat>& all_features) const;
};

void save_model(const LoadedModel& model, const std::filesystem::path& path,
                const std::string& hash);
LoadedModel load_model(const std::filesystem::path& path);

/// Deterministic parallel map: f(i) runs for i in [0, n) on `jobs` threads,
/// results land by index.
void parallel_for(Index n, int jobs, const std::function<void(Index)>& f);

}  // namespace ppgbp::pipeline
