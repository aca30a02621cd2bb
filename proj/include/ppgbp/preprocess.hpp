#pragma once

#include "ppgbp/types.hpp"

#include <string>
#include <vector>

namespace ppgbp::preprocess {

/// z-score: subtract mean, divide by the sample (n-1) standard deviation.
Vec zscore_normalize(const Eigen::Ref<const Vec>& x);

// Low-pass Butterworth realized as cascaded biquads (second-order
// sections). Each section is normalized to unit DC gain, so a constant
// passes exactly.
struct Biquad {
    double b0, b1, b2;  // numerator (a0 == 1)
    double a1, a2;
};

struct FilterDesign {
    std::vector<Biquad> sections;
    int order = 0;
    double cutoff_hz = 0;
    double sample_rate_hz = 0;

    // Padding needed for edge transients to decay below ~1e-10, derived
    // from the slowest pole of the analog prototype.
    Index transient_pad() const;
};

FilterDesign butterworth_lowpass(int order, double cutoff_hz,
                                 double sample_rate_hz);

/// One causal pass through the section cascade, zero initial state.
Vec sosfilt(const FilterDesign& d, const Eigen::Ref<const Vec>& x);

/// Forward-backward (zero-phase) Butterworth low-pass. The signal is
/// extended by odd reflection at both ends before the forward pass and the
/// extension is stripped after the backward pass.
Vec lowpass_zero_phase(const Eigen::Ref<const Vec>& x, double sample_rate_hz,
                       int order, double cutoff_hz);

/// Least-squares polynomial detrend over the normalized index t in [-1,1],
/// Legendre basis. Returns x minus the fitted trend.
Vec detrend_polynomial(const Eigen::Ref<const Vec>& x, int degree);

struct Config {
    int filter_order = 6;
    double filter_cutoff_hz = 25.0;
    int detrend_degree = 4;
    // Stage toggles for ablation runs.
    bool normalize = true;
    bool filter = true;
    bool detrend = true;
};

struct CleanSignal {
    Vec samples;
    double sample_rate_hz = 0;
    std::vector<std::string> provenance;  // applied stage names, in order
};

/// Full pipeline: zscore -> butterworth_zero_phase -> poly_detrend.
/// Stage failures are rethrown with the stage name prefixed.
CleanSignal run(const Eigen::Ref<const Vec>& raw_samples, double sample_rate_hz,
                const Config& cfg = {});

}  // namespace ppgbp::preprocess
