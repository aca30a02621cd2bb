#include "ppgbp/features.hpp"

#include "ppgbp/detail/peaks.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ppgbp::features {

namespace {

double checked_ratio(double num, double den, const char* what) {
    if (std::abs(den) < 1e-12)
        throw FeatureError(std::string("degenerate feature: ") + what +
                           " has zero denominator");
    return num / den;
}

// Trapezoid integral of (samples - baseline) over [lo, hi], dt = 1/fs.
double beat_area(const Eigen::Ref<const Vec>& samples, Index lo, Index hi,
                 double baseline, double fs) {
    double area = 0;
    for (Index i = lo; i < hi; ++i)
        area += 0.5 * ((samples[i] - baseline) + (samples[i + 1] - baseline));
    return area / fs;
}

}  // namespace

const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = {
        "Systolic Peak (x)",
        "Diastolic Peak (y)",
        "Height of Notch (z)",
        "Systolic Peak Time (t1)",
        "Notch Time (t2)",
        "Diastolic Peak Time (t3)",
        "Delta T",
        "Pulse Interval (tpi)",
        "Peak to Peak Interval (tpp)",
        "Pulse Width (w50)",
        "Inflection Point Area (A1/A2)",
        "Augmentation Index (y/x)",
        "Alternative Augmentation Index ((x-y)/x)",
        "Systolic Peak Output Curve (t1/x)",
        "Diastolic Peak Downward Curve (y/(tpi-t3))",
        "t1/tpp",
        "t2/tpp",
        "t3/tpp",
        "DeltaT/tpp",
        "z/x",
        "t2/z",
        "t3/y",
        "x/(tpi-t1)",
        "z/(tpi-t2)",
        "Width(25%)",
        "Width(75%)",
        "Width(25%)/t1",
        "Width(25%)/t2",
        "Width(25%)/t3",
        "Width(25%)/DeltaT",
        "Width(25%)/tpi",
        "Width(50%)/t1",
        "Width(50%)/t2",
        "Width(50%)/t3",
        "Width(50%)/DeltaT",
        "Width(50%)/tpi",
        "Width(75%)/t1",
        "Width(75%)/t2",
        "Width(75%)/t3",
        "Width(75%)/DeltaT",
        "Width(75%)/tpi",
        "a1",
        "ta1",
        "a2",
        "ta2",
        "b1",
        "tb1",
        "b2",
        "tb2",
        "b2/a2",
        "b1/a1",
        "ta1/tpp",
        "tb1/tpp",
        "tb2/tpp",
        "ta2/tpp",
        "(ta1-ta2)/tpp",
        "(tb1-tb2)/tpp",
        "Height/DeltaT (Stiffness Index)",
        "Weight/DeltaT",
        "BMI/DeltaT",
        "Height/t1",
        "Weight/t1",
        "BMI/t1",
        "Height/t2",
        "Weight/t2",
        "BMI/t2",
        "Height/t3",
        "Weight/t3",
        "BMI/t3",
        "Height/tpi",
        "Weight/tpi",
        "BMI/tpi",
        "Height/tpp",
        "Weight/tpp",
        "BMI/tpp",
        "peak-1",
        "peak-2",
        "peak-3",
        "Freq-1",
        "Freq-2",
        "Freq-3",
        "A0-2",
        "A2-5",
        "A0-2/A2-5",
        "Peak-1/Peak-2",
        "Peak-1/Peak-3",
        "Freq-1/Freq-2",
        "Freq-1/Freq-3",
        "Maximum Frequency (fmax)",
        "Magnitude at Fmax",
        "Ratio of Signal Energy",
        "Mean",
        "Median",
        "Standard Deviation",
        "Percentile (75th)",
        "Mean Absolute Deviation",
        "Inter Quartile Range",
        "Skewness",
        "Kurtosis",
        "Shannon Entropy",
        "Spectral Entropy",
        "Height",
        "Weight",
        "Gender",
        "Age",
        "BMI",
        "Heart Rate",
    };
    return names;
}

Vec time_domain_features(const fiducials::FiducialSet& fid,
                         const preprocess::CleanSignal& clean) {
    fid.check_invariants();
    const Vec& s = clean.samples;
    const double fs = clean.sample_rate_hz;
    const double delta_t = fid.t3_s - fid.t1_s;

    const double a1_area =
        beat_area(s, fid.foot_idx, fid.notch_idx, fid.foot_amplitude, fs);
    const double a2_area =
        beat_area(s, fid.notch_idx, fid.beat_end_idx, fid.foot_amplitude, fs);

    Vec f(24);
    f[0] = fid.x;
    f[1] = fid.y;
    f[2] = fid.z;
    f[3] = fid.t1_s;
    f[4] = fid.t2_s;
    f[5] = fid.t3_s;
    f[6] = delta_t;
    f[7] = fid.tpi_s;
    f[8] = fid.tpp_s;
    f[9] = width_at_fraction(s, fid, 0.5);
    f[10] = checked_ratio(a1_area, a2_area, "A1/A2");
    f[11] = checked_ratio(fid.y, fid.x, "y/x");
    f[12] = checked_ratio(fid.x - fid.y, fid.x, "(x-y)/x");
    f[13] = checked_ratio(fid.t1_s, fid.x, "t1/x");
    f[14] = checked_ratio(fid.y, fid.tpi_s - fid.t3_s, "y/(tpi-t3)");
    f[15] = checked_ratio(fid.t1_s, fid.tpp_s, "t1/tpp");
    f[16] = checked_ratio(fid.t2_s, fid.tpp_s, "t2/tpp");
    f[17] = checked_ratio(fid.t3_s, fid.tpp_s, "t3/tpp");
    f[18] = checked_ratio(delta_t, fid.tpp_s, "DeltaT/tpp");
    f[19] = checked_ratio(fid.z, fid.x, "z/x");
    f[20] = checked_ratio(fid.t2_s, fid.z, "t2/z");
    f[21] = checked_ratio(fid.t3_s, fid.y, "t3/y");
    f[22] = checked_ratio(fid.x, fid.tpi_s - fid.t1_s, "x/(tpi-t1)");
    f[23] = checked_ratio(fid.z, fid.tpi_s - fid.t2_s, "z/(tpi-t2)");
    return f;
}

double width_at_fraction(const Eigen::Ref<const Vec>& samples,
                         const fiducials::FiducialSet& fid, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ArgumentError("width_at_fraction: fraction must lie in (0,1)");
    const Index lo = fid.foot_idx;
    const Index hi = fid.beat_end_idx;
    const double level = fid.foot_amplitude + fraction * fid.x;
    const double fs = fid.sample_rate_hz;

    double t_up = -1;
    for (Index i = lo; i < hi; ++i) {
        if (samples[i] < level && samples[i + 1] >= level) {
            t_up = static_cast<double>(i) +
                   (level - samples[i]) / (samples[i + 1] - samples[i]);
            break;
        }
    }
    double t_down = -1;
    for (Index i = hi - 1; i >= lo; --i) {
        if (samples[i] >= level && samples[i + 1] < level) {
            t_down = static_cast<double>(i) +
                     (samples[i] - level) / (samples[i] - samples[i + 1]);
            break;
        }
    }
    if (t_up < 0 || t_down < 0 || t_down <= t_up)
        throw GeometryError("width_at_fraction: level not crossed twice");
    return (t_down - t_up) / fs;
}

Vec width_features(const Eigen::Ref<const Vec>& samples,
                   const fiducials::FiducialSet& fid) {
    const double w25 = width_at_fraction(samples, fid, 0.25);
    const double w50 = width_at_fraction(samples, fid, 0.50);
    const double w75 = width_at_fraction(samples, fid, 0.75);
    const double delta_t = fid.t3_s - fid.t1_s;

    Vec f(17);
    f[0] = w25;
    f[1] = w75;
    int k = 2;
    for (const double w : {w25, w50, w75}) {
        f[k++] = checked_ratio(w, fid.t1_s, "width/t1");
        f[k++] = checked_ratio(w, fid.t2_s, "width/t2");
        f[k++] = checked_ratio(w, fid.t3_s, "width/t3");
        f[k++] = checked_ratio(w, delta_t, "width/DeltaT");
        f[k++] = checked_ratio(w, fid.tpi_s, "width/tpi");
    }
    return f;
}

Vec derivative_features(const fiducials::FiducialSet& fid) {
    Vec f(16);
    f[0] = fid.a1;
    f[1] = fid.ta1_s;
    f[2] = fid.a2;
    f[3] = fid.ta2_s;
    f[4] = fid.b1;
    f[5] = fid.tb1_s;
    f[6] = fid.b2;
    f[7] = fid.tb2_s;
    f[8] = checked_ratio(fid.b2, fid.a2, "b2/a2");
    f[9] = checked_ratio(fid.b1, fid.a1, "b1/a1");
    f[10] = checked_ratio(fid.ta1_s, fid.tpp_s, "ta1/tpp");
    f[11] = checked_ratio(fid.tb1_s, fid.tpp_s, "tb1/tpp");
    f[12] = checked_ratio(fid.tb2_s, fid.tpp_s, "tb2/tpp");
    f[13] = checked_ratio(fid.ta2_s, fid.tpp_s, "ta2/tpp");
    f[14] = checked_ratio(fid.ta1_s - fid.ta2_s, fid.tpp_s, "(ta1-ta2)/tpp");
    f[15] = checked_ratio(fid.tb1_s - fid.tb2_s, fid.tpp_s, "(tb1-tb2)/tpp");
    return f;
}

Vec demographic_time_features(const fiducials::FiducialSet& fid,
                              const dataset::Demographics& demo) {
    demo.validate();
    const double delta_t = fid.t3_s - fid.t1_s;
    const double intervals[] = {delta_t,   fid.t1_s, fid.t2_s,
                                fid.t3_s,  fid.tpi_s, fid.tpp_s};
    const char* interval_names[] = {"DeltaT", "t1", "t2", "t3", "tpi", "tpp"};
    Vec f(18);
    int k = 0;
    for (int i = 0; i < 6; ++i) {
        f[k++] = checked_ratio(demo.height_cm, intervals[i], interval_names[i]);
        f[k++] = checked_ratio(demo.weight_kg, intervals[i], interval_names[i]);
        f[k++] = checked_ratio(demo.bmi_kg_m2, intervals[i], interval_names[i]);
    }
    return f;
}

Spectrum fft_spectrum(const Eigen::Ref<const Vec>& samples,
                      double sample_rate_hz) {
    const Index n = samples.size();
    if (n < 2) throw LengthError("fft_spectrum: need at least 2 samples");
    std::vector<double> x(samples.data(), samples.data() + n);
    std::vector<std::complex<double>> dft;
    Eigen::FFT<double> fft;
    fft.fwd(dft, x);

    Spectrum spec;
    spec.n_fft = static_cast<int>(n);
    const Index half = n / 2;  // one-sided bins 0..half
    spec.freqs_hz.resize(half + 1);
    spec.magnitude.resize(half + 1);
    for (Index k = 0; k <= half; ++k) {
        spec.freqs_hz[k] =
            static_cast<double>(k) * sample_rate_hz / static_cast<double>(n);
        spec.magnitude[k] = std::abs(dft[static_cast<size_t>(k)]);
    }
    return spec;
}

namespace {

// Trapezoid area of the magnitude between lo_hz and hi_hz, interpolating at
// the band edges.
double band_area(const Spectrum& spec, double lo_hz, double hi_hz) {
    const Vec& f = spec.freqs_hz;
    const Vec& m = spec.magnitude;
    const Index n = f.size();
    auto value_at = [&](double hz) {
        const Index k = static_cast<Index>(
            std::upper_bound(f.data(), f.data() + n, hz) - f.data()) - 1;
        if (k >= n - 1) return m[n - 1];
        const double w = (hz - f[k]) / (f[k + 1] - f[k]);
        return m[k] + w * (m[k + 1] - m[k]);
    };
    lo_hz = std::max(lo_hz, f[0]);
    hi_hz = std::min(hi_hz, f[n - 1]);
    if (hi_hz <= lo_hz) return 0.0;

    double area = 0;
    double prev_hz = lo_hz, prev_v = value_at(lo_hz);
    for (Index k = 0; k < n; ++k) {
        if (f[k] <= lo_hz) continue;
        if (f[k] >= hi_hz) break;
        area += 0.5 * (prev_v + m[k]) * (f[k] - prev_hz);
        prev_hz = f[k];
        prev_v = m[k];
    }
    area += 0.5 * (prev_v + value_at(hi_hz)) * (hi_hz - prev_hz);
    return area;
}

}  // namespace

Vec frequency_features(const Spectrum& spec, const Config& cfg,
                       std::set<std::string>* flags) {
    const Vec& m = spec.magnitude;
    const Vec& fr = spec.freqs_hz;
    const Index n = m.size();
    if (n < 4) throw LengthError("frequency_features: spectrum too short");

    const double global_max = m.tail(n - 1).maxCoeff();
    if (!(global_max > 0))
        throw FeatureError("frequency_features: empty spectrum (DC only)");

    // The three largest prominent maxima on (0, band], reported in
    // frequency order. Missing peaks duplicate the last found one.
    struct Peak {
        double freq, mag;
    };
    std::vector<Peak> found;
    for (Index p : detail::local_maxima(m)) {
        if (p == 0 || fr[p] > cfg.peak_band_hz) continue;
        if (detail::peak_prominence(m, p) <
            cfg.peak_prominence_frac * global_max)
            continue;
        found.push_back({fr[p], m[p]});
    }
    if (found.empty())
        throw FeatureError("frequency_features: no spectral peak in band");
    std::stable_sort(found.begin(), found.end(),
                     [](const Peak& a, const Peak& b) { return a.mag > b.mag; });
    if (found.size() > 3) found.resize(3);
    if (found.size() < 3) {
        if (flags) flags->insert("freq_peak_deficit");
        while (found.size() < 3) found.push_back(found.back());
    }
    std::sort(found.begin(), found.end(),
              [](const Peak& a, const Peak& b) { return a.freq < b.freq; });

    const double a02 = band_area(spec, 0.0, 2.0);
    const double a25 = band_area(spec, 2.0, 5.0);

    Index max_bin = 1;
    for (Index k = 1; k < n; ++k)
        if (m[k] > m[max_bin]) max_bin = k;
    const double bin_hz = fr[1] - fr[0];
    const double delta_f = cfg.delta_f_bins * bin_hz;

    double energy_total = 0, energy_window = 0;
    for (Index k = 0; k < n; ++k) {
        const double e = m[k] * m[k];
        energy_total += e;
        if (std::abs(fr[k] - fr[max_bin]) <= delta_f + 1e-12) energy_window += e;
    }

    Vec f(16);
    f[0] = found[0].mag;
    f[1] = found[1].mag;
    f[2] = found[2].mag;
    f[3] = found[0].freq;
    f[4] = found[1].freq;
    f[5] = found[2].freq;
    f[6] = a02;
    f[7] = a25;
    f[8] = checked_ratio(a02, a25, "A0-2/A2-5");
    f[9] = checked_ratio(found[0].mag, found[1].mag, "peak-1/peak-2");
    f[10] = checked_ratio(found[0].mag, found[2].mag, "peak-1/peak-3");
    f[11] = checked_ratio(found[0].freq, found[1].freq, "Freq-1/Freq-2");
    f[12] = checked_ratio(found[0].freq, found[2].freq, "Freq-1/Freq-3");
    f[13] = fr[max_bin];
    f[14] = m[max_bin];
    f[15] = checked_ratio(energy_window, energy_total, "energy ratio");
    return f;
}

namespace {

// Type-7 quantile (linear interpolation between order statistics).
double quantile_sorted(const std::vector<double>& sorted, double q) {
    const size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = q * static_cast<double>(n - 1);
    const size_t k = static_cast<size_t>(std::floor(h));
    if (k + 1 >= n) return sorted[n - 1];
    return sorted[k] + (h - static_cast<double>(k)) * (sorted[k + 1] - sorted[k]);
}

}  // namespace

double shannon_entropy(const Eigen::Ref<const Vec>& samples, int bins) {
    if (bins < 1) throw ArgumentError("shannon_entropy: bins must be >= 1");
    const Index n = samples.size();
    const double lo = samples.minCoeff();
    const double hi = samples.maxCoeff();
    if (!(hi > lo)) return 0.0;  // all mass in one bin
    std::vector<Index> counts(static_cast<size_t>(bins), 0);
    for (Index i = 0; i < n; ++i) {
        int b = static_cast<int>(static_cast<double>(bins) *
                                 (samples[i] - lo) / (hi - lo));
        b = std::min(b, bins - 1);
        ++counts[static_cast<size_t>(b)];
    }
    double h = 0;
    for (Index c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(n);
        h -= p * std::log2(p);
    }
    return h;
}

Vec statistical_features(const Eigen::Ref<const Vec>& samples,
                         const Config& cfg) {
    const Index n = samples.size();
    if (n < 8) throw LengthError("statistical_features: need at least 8 samples");

    const double mean = samples.mean();
    const auto centered = samples.array() - mean;
    const double m2 = centered.square().sum() / static_cast<double>(n);
    if (!(m2 > 0))
        throw DegenerateSignalError("statistical_features: constant signal");
    const double sd_sample =
        std::sqrt(centered.square().sum() / static_cast<double>(n - 1));
    const double s_pop = std::sqrt(m2);
    const double m3 = centered.cube().sum() / static_cast<double>(n);
    const double m4 = centered.pow(4).sum() / static_cast<double>(n);

    std::vector<double> sorted(samples.data(), samples.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const double median = quantile_sorted(sorted, 0.5);
    const double p25 = quantile_sorted(sorted, 0.25);
    const double p75 = quantile_sorted(sorted, 0.75);
    const double mad = centered.abs().sum() / static_cast<double>(n);

    // Spectral entropy on the same magnitudes fft_spectrum produces, so the
    // two views of the power spectrum stay consistent.
    const Spectrum spec = fft_spectrum(samples, 1.0);
    const Index nb = spec.magnitude.size();
    const double power_total = spec.magnitude.squaredNorm();
    double sen = 0;
    if (power_total > 0) {
        for (Index k = 0; k < nb; ++k) {
            const double p = spec.magnitude[k] * spec.magnitude[k] / power_total;
            if (p > 0) sen -= p * std::log2(p);
        }
        sen /= std::log2(static_cast<double>(nb));
    }

    Vec f(10);
    f[0] = mean;
    f[1] = median;
    f[2] = sd_sample;
    f[3] = p75;
    f[4] = mad;
    f[5] = p75 - p25;
    f[6] = m3 / std::pow(s_pop, 3);
    f[7] = m4 / std::pow(s_pop, 4) - 3.0;
    f[8] = shannon_entropy(samples, cfg.entropy_bins);
    f[9] = sen;
    return f;
}

FeatureVector assemble_features(const preprocess::CleanSignal& clean,
                                const fiducials::FiducialSet& fid,
                                const dataset::Demographics& demo,
                                const Config& cfg) {
    FeatureVector out;
    out.values.resize(kFeatureCount);
    out.flags = fid.flags;

    auto block = [&](const char* name, Index offset, auto&& compute) {
        try {
            const Vec v = compute();
            out.values.segment(offset, v.size()) = v;
        } catch (const Error& e) {
            throw ExtractionError(std::string("feature block ") + name + ": " +
                                  e.what());
        }
    };
    block("time_domain", 0, [&] { return time_domain_features(fid, clean); });
    block("width", 24, [&] { return width_features(clean.samples, fid); });
    block("derivative", 41, [&] { return derivative_features(fid); });
    block("demographic_time", 57,
          [&] { return demographic_time_features(fid, demo); });
    block("frequency", 75, [&] {
        const Spectrum spec = fft_spectrum(clean.samples, clean.sample_rate_hz);
        return frequency_features(spec, cfg, &out.flags);
    });
    block("statistical", 91,
          [&] { return statistical_features(clean.samples, cfg); });

    out.values[101] = demo.height_cm;
    out.values[102] = demo.weight_kg;
    out.values[103] = demo.sex == dataset::Sex::male ? 0.0 : 1.0;
    out.values[104] = demo.age_years;
    out.values[105] = demo.bmi_kg_m2;
    if (demo.heart_rate_bpm && *demo.heart_rate_bpm > 0) {
        out.values[106] = *demo.heart_rate_bpm;
    } else {
        out.values[106] = 60.0 / fid.tpp_s;
        out.flags.insert("heart_rate_from_tpp");
    }

    if (out.flags.empty() && !out.values.allFinite())
        throw ExtractionError("non-finite feature on an unflagged record");
    return out;
}

}  // namespace ppgbp::features
