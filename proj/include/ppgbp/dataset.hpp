#pragma once

#include "ppgbp/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ppgbp::dataset {

enum class Sex { male, female };

struct RawSignal {
    Vec samples;
    double sample_rate_hz = 1000.0;
    std::string subject_id;
    int segment_id = 0;
};

struct Demographics {
    Sex sex = Sex::male;
    double age_years = 0;
    double height_cm = 0;
    double weight_kg = 0;
    double bmi_kg_m2 = 0;
    std::optional<double> heart_rate_bpm;  // recomputed from the pulse when absent

    void validate() const;
};

struct GroundTruth {
    double sbp_mmhg = 0;
    double dbp_mmhg = 0;

    void validate() const;
};

struct SubjectInfo {
    std::string subject_id;
    Demographics demo;
    GroundTruth truth;
};

struct PpgRecord {
    RawSignal signal;
    Demographics demo;
    GroundTruth truth;
};

/// Loads one segment file: whitespace-separated amplitudes, filename
/// "<subject>_<segment>.txt".
RawSignal parse_signal_file(const std::filesystem::path& path,
                            double sample_rate_hz = 1000.0);

/// Loads the subject info sheet (CSV with a header row). column_map maps the
/// canonical names {subject_id, sex, age, height, weight, sbp, dbp,
/// heart_rate, bmi} to the actual header names; common aliases (including the
/// public PPG-BP sheet's) are recognized without a map. BMI is recomputed
/// from height/weight when the column or cell is missing, or when the stated
/// value is off by more than 1%.
std::vector<SubjectInfo> parse_subject_table(
    const std::filesystem::path& path,
    const std::map<std::string, std::string>& column_map = {});

/// Skewness-based signal quality index: the population third standardized
/// moment g1 = mean((x - mean)^3) / stddev^3.
double skewness_sqi(const Eigen::Ref<const Vec>& samples);

struct QcPartition {
    std::vector<PpgRecord> accepted;
    std::vector<PpgRecord> rejected;
    std::vector<double> accepted_sqi;
    std::vector<double> rejected_sqi;  // NaN for degenerate (constant) signals
};

/// Keeps records with skewness_sqi >= threshold. Degenerate signals land in
/// rejected. Order is preserved within each part.
QcPartition qc_filter(const std::vector<PpgRecord>& records, double threshold);

/// Threshold that brings the kept-count closest to target_kept on this set
/// (ties resolve toward keeping more).
double calibrate_sqi_threshold(const std::vector<PpgRecord>& records,
                               int target_kept);

struct SplitIndices {
    std::vector<Index> train;
    std::vector<Index> test;
};

/// Seeded by-record split; |test| = round(test_fraction * n). Deterministic
/// across platforms for a fixed seed.
SplitIndices split_train_test(Index n, double test_fraction,
                              std::uint64_t seed);

/// Subject-grouped variant: whole subjects go to one side; subjects are
/// drawn in shuffled order into the test side until it reaches
/// round(test_fraction * n) records.
SplitIndices split_train_test_by_subject(
    const std::vector<std::string>& subject_ids, double test_fraction,
    std::uint64_t seed);

}  // namespace ppgbp::dataset
