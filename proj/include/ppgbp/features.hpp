#pragma once

#include "ppgbp/dataset.hpp"
#include "ppgbp/fiducials.hpp"
#include "ppgbp/preprocess.hpp"
#include "ppgbp/types.hpp"

#include <array>
#include <set>
#include <string>

namespace ppgbp::features {

inline constexpr int kFeatureCount = 107;

/// Canonical feature names, index 0 holds feature 1. Used as the
/// features.csv header and in selection reports.
const std::array<std::string, kFeatureCount>& feature_names();

struct Config {
    double peak_band_hz = 10.0;          // spectral peak search band (0, band]
    double peak_prominence_frac = 0.01;  // of the non-DC magnitude maximum
    int delta_f_bins = 1;                // half-width of the f_max energy window
    int entropy_bins = 16;               // amplitude histogram bins
};

struct FeatureVector {
    Vec values;  // length 107, order fixed by feature_names()
    std::set<std::string> flags;
};

struct Spectrum {
    Vec freqs_hz;   // ascending, 0 .. Nyquist
    Vec magnitude;  // |DFT|, one-sided
    int n_fft = 0;
};

/// Features 1-24 (beat geometry, amplitudes, times, ratio features).
Vec time_domain_features(const fiducials::FiducialSet& fid,
                         const preprocess::CleanSignal& clean);

/// Pulse width (seconds) at the given fraction of the systolic amplitude,
/// measured between the first upslope and last downslope crossings within
/// the beat, with linear interpolation.
double width_at_fraction(const Eigen::Ref<const Vec>& samples,
                         const fiducials::FiducialSet& fid, double fraction);

/// Features 25-41 (widths at 25/50/75% and their ratios to the intervals).
Vec width_features(const Eigen::Ref<const Vec>& samples,
                   const fiducials::FiducialSet& fid);

/// Features 42-57 (derivative landmark values, times and ratios).
Vec derivative_features(const fiducials::FiducialSet& fid);

/// Features 58-75 (height/weight/BMI over the six intervals).
Vec demographic_time_features(const fiducials::FiducialSet& fid,
                              const dataset::Demographics& demo);

/// One-sided DFT magnitude with n_fft equal to the signal length.
Spectrum fft_spectrum(const Eigen::Ref<const Vec>& samples,
                      double sample_rate_hz);

/// Features 76-91 (spectral peaks, band areas, f_max and energy ratio).
Vec frequency_features(const Spectrum& spec, const Config& cfg = {},
                       std::set<std::string>* flags = nullptr);

/// Features 92-101 (moments, percentiles, entropies). Throws on a constant
/// signal (stddev-dependent features are undefined).
Vec statistical_features(const Eigen::Ref<const Vec>& samples,
                         const Config& cfg = {});

/// Shannon entropy (bits) of an equal-width amplitude histogram.
double shannon_entropy(const Eigen::Ref<const Vec>& samples, int bins);

/// Full 107-entry vector: blocks 1-101 from the clean signal plus
/// demographics at 102-107. Heart rate falls back to 60/tpp when the
/// subject table has none.
FeatureVector assemble_features(const preprocess::CleanSignal& clean,
                                const fiducials::FiducialSet& fid,
                                const dataset::Demographics& demo,
                                const Config& cfg = {});

}  // namespace ppgbp::features
