#pragma once

#include "ppgbp/preprocess.hpp"
#include "ppgbp/types.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ppgbp::fiducials {

struct DerivativePair {
    Vec d1;  // amplitude / s
    Vec d2;  // amplitude / s^2 (the APG)
};

/// Central differences scaled by the sample rate; one-sided at the ends.
DerivativePair differentiate(const Eigen::Ref<const Vec>& samples,
                             double sample_rate_hz);

struct Config {
    double min_peak_distance_s = 0.33;   // ~180 bpm ceiling
    double peak_prominence_frac = 0.25;  // of signal range
    double movavg_window_ms = 25.0;
    double foot_zone_s = 0.5;            // trailing window before a systolic peak
    double foot_threshold_k = 0.5;       // thr = mean + k*std of smoothed APG
    double foot_fallback_window_s = 0.4;
    double fix_window_ms = 50.0;
};

/// Prominent systolic peak candidates, ascending, at least
/// min_peak_distance apart. Throws NoBeatError when nothing qualifies.
std::vector<Index> detect_systolic_peaks(const Eigen::Ref<const Vec>& samples,
                                         double sample_rate_hz,
                                         const Config& cfg = {});

/// Beat onset: index of the APG maximum inside the zone of interest
/// preceding sys_idx (where the moving-averaged APG exceeds an adaptive
/// threshold). Falls back to the signal minimum in the 0.4 s window before
/// the peak when the zone is empty, setting *used_fallback.
Index detect_foot(const Eigen::Ref<const Vec>& samples,
                  const Eigen::Ref<const Vec>& apg, double sample_rate_hz,
                  Index sys_idx, const Config& cfg = {},
                  bool* used_fallback = nullptr);

enum class ExtremumMode { min, max };

/// Local extremum within idx +/- window_ms/2 (clamped to [lo, hi] and the
/// signal). Moves only on strict improvement, so a constant window returns
/// idx itself.
Index fix_index(const Eigen::Ref<const Vec>& samples, Index idx,
                double window_ms, double sample_rate_hz, ExtremumMode mode,
                Index lo = 0, Index hi = -1);

/// Dicrotic notch between the systolic and diastolic peaks: minimum of the
/// signal minus the chord joining the two peaks, refined by fix_index over
/// a 50 ms window.
Index detect_notch(const Eigen::Ref<const Vec>& samples, Index sys_idx,
                   Index dia_idx, double sample_rate_hz,
                   const Config& cfg = {});

/// Highest local maximum on (notch_idx, beat_end_idx); on a monotone decay
/// falls back to the inflection point (maximum of the local first
/// derivative), setting *low_confidence.
Index detect_diastolic_peak(const Eigen::Ref<const Vec>& samples,
                            Index notch_idx, Index beat_end_idx,
                            bool* low_confidence = nullptr);

struct FiducialSet {
    Index foot_idx = 0;
    Index sys_idx = 0;
    Index notch_idx = 0;
    Index dia_idx = 0;
    Index beat_end_idx = 0;
    std::optional<Index> next_sys_idx;

    // Amplitudes above the foot level.
    double x = 0;  // systolic
    double y = 0;  // diastolic
    double z = 0;  // notch

    // Times from the foot, in seconds.
    double t1_s = 0;   // foot -> systolic
    double t2_s = 0;   // foot -> notch
    double t3_s = 0;   // foot -> diastolic
    double tpi_s = 0;  // foot -> beat end
    double tpp_s = 0;  // systolic -> next systolic (tpi fallback)

    // Derivative landmarks: values and indices/times from the foot.
    double a1 = 0, b1 = 0, a2 = 0, b2 = 0;
    Index a1_idx = 0, b1_idx = 0, a2_idx = 0, b2_idx = 0;
    double ta1_s = 0, tb1_s = 0, ta2_s = 0, tb2_s = 0;

    double sample_rate_hz = 0;
    double foot_amplitude = 0;  // raw sample value at the foot

    std::set<std::string> flags;

    void check_invariants() const;  // throws InvariantError
};

/// Landmarks of the first complete beat (first unflagged beat when
/// possible). Throws NoBeatError when no beat can be resolved.
FiducialSet extract_fiducials(const preprocess::CleanSignal& clean,
                              const Config& cfg = {});

/// Per-record debug dump (indices, times, flags) for plots and fixtures.
std::string debug_json(const FiducialSet& fid);

}  // namespace ppgbp::fiducials
