#pragma once

#include "ppgbp/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ppgbp::eval {

// Predictions paired with ground truth, both in mmHg.
struct PredictionSet {
    Vec predicted;
    Vec actual;
    std::vector<std::string> subject_ids;  // empty => every record its own subject

    void validate() const;
    int distinct_subjects() const;
};

struct Metrics {
    double mae = 0;
    double mse = 0;
    double rmse = 0;
    std::optional<double> r;  // sqrt(1 - MSE/MSE_baseline), clamped to 0 when worse
    bool worse_than_baseline = false;
};

/// MAE, MSE, RMSE and the correlation coefficient R against the
/// mean-predictor baseline. With require_r the call throws when the
/// baseline variance is zero (R undefined); otherwise r is left empty.
Metrics regression_metrics(const PredictionSet& p, bool require_r = true);

// AAMI acceptance limits (mean error, error SD, minimum subject count).
inline constexpr double kAamiMeanMaxMmhg = 5.0;
inline constexpr double kAamiSdMaxMmhg = 8.0;
inline constexpr int kAamiMinSubjects = 85;

struct AamiVerdict {
    double error_mean = 0;  // signed, predicted - actual
    double error_sd = 0;    // sample (n-1) standard deviation
    int n_subjects = 0;
    bool mean_ok = false;
    bool sd_ok = false;
    bool subjects_ok = false;
    bool pass = false;
};

AamiVerdict aami_check(const PredictionSet& p);

enum class BhsGrade { A, B, C, fail };

std::string to_string(BhsGrade g);

struct BhsResult {
    double pct_le_5 = 0;
    double pct_le_10 = 0;
    double pct_le_15 = 0;
    BhsGrade grade = BhsGrade::fail;
};

/// Cumulative |error| percentages at 5/10/15 mmHg and the best grade whose
/// three thresholds are all met (A: 60/85/95, B: 50/75/90, C: 40/65/85).
BhsResult bhs_grade(const PredictionSet& p);

struct EvaluationReport {
    std::string target;  // "sbp" or "dbp"
    Metrics metrics;
    AamiVerdict aami;
    BhsResult bhs;
    int n_records = 0;
    int n_subjects = 0;
};

EvaluationReport evaluate_target(const std::string& target, const PredictionSet& p);

// Rendered artifacts for the report subcommand. Strings are byte-stable
// for identical inputs so golden-file tests can compare them directly.
struct ReportArtifacts {
    std::string report_json;              // both targets, metrics + gradings
    std::string predictions_csv;          // per-record actual/predicted/error
    std::string scatter_sbp_csv;          // actual,predicted pairs
    std::string scatter_dbp_csv;
};

ReportArtifacts build_report(const PredictionSet& sbp, const PredictionSet& dbp);

}  // namespace ppgbp::eval
