#include "ppgbp/fiducials.hpp"

#include "ppgbp/detail/peaks.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace ppgbp::fiducials {

namespace {

Index round_samples(double seconds, double fs) {
    return static_cast<Index>(std::llround(seconds * fs));
}

// Centered moving average via prefix sums, window clamped at the edges.
Vec moving_average(const Eigen::Ref<const Vec>& x, Index window) {
    const Index n = x.size();
    const Index half = std::max<Index>(window / 2, 0);
    std::vector<double> prefix(static_cast<size_t>(n) + 1, 0.0);
    for (Index i = 0; i < n; ++i)
        prefix[static_cast<size_t>(i) + 1] = prefix[static_cast<size_t>(i)] + x[i];
    Vec out(n);
    for (Index i = 0; i < n; ++i) {
        const Index lo = std::max<Index>(0, i - half);
        const Index hi = std::min<Index>(n - 1, i + half);
        out[i] = (prefix[static_cast<size_t>(hi) + 1] - prefix[static_cast<size_t>(lo)]) /
                 static_cast<double>(hi - lo + 1);
    }
    return out;
}

}  // namespace

DerivativePair differentiate(const Eigen::Ref<const Vec>& samples,
                             double sample_rate_hz) {
    const Index n = samples.size();
    if (n < 5) throw LengthError("differentiate: need at least 5 samples");
    auto diff = [n, sample_rate_hz](const Vec& x) {
        Vec d(n);
        d[0] = (x[1] - x[0]) * sample_rate_hz;
        for (Index i = 1; i < n - 1; ++i)
            d[i] = (x[i + 1] - x[i - 1]) * sample_rate_hz / 2.0;
        d[n - 1] = (x[n - 1] - x[n - 2]) * sample_rate_hz;
        return d;
    };
    DerivativePair pair;
    pair.d1 = diff(samples);
    pair.d2 = diff(pair.d1);
    return pair;
}

std::vector<Index> detect_systolic_peaks(const Eigen::Ref<const Vec>& samples,
                                         double sample_rate_hz,
                                         const Config& cfg) {
    const double range = samples.maxCoeff() - samples.minCoeff();
    if (!(range > 0)) throw NoBeatError("detect_systolic_peaks: flat signal");
    auto candidates =
        detail::prominent_maxima(samples, cfg.peak_prominence_frac * range);
    if (candidates.empty())
        throw NoBeatError("detect_systolic_peaks: no prominent peak found");
    const Index min_dist =
        std::max<Index>(1, round_samples(cfg.min_peak_distance_s, sample_rate_hz));
    return detail::enforce_min_distance(std::move(candidates), min_dist);
}

Index detect_foot(const Eigen::Ref<const Vec>& samples,
                  const Eigen::Ref<const Vec>& apg, double sample_rate_hz,
                  Index sys_idx, const Config& cfg, bool* used_fallback) {
    if (samples.size() != apg.size())
        throw ShapeError("detect_foot: samples/apg length mismatch");
    if (sys_idx <= 0 || sys_idx >= samples.size())
        throw ArgumentError("detect_foot: sys_idx out of range");
    if (used_fallback) *used_fallback = false;

    const Index zone_lo =
        std::max<Index>(0, sys_idx - round_samples(cfg.foot_zone_s, sample_rate_hz));
    const Index zone_hi = sys_idx;  // exclusive

    const Index ma_window =
        std::max<Index>(1, round_samples(cfg.movavg_window_ms / 1000.0, sample_rate_hz));
    const Vec ma = moving_average(apg, ma_window);

    const Index w = zone_hi - zone_lo;
    double mean = 0;
    for (Index i = zone_lo; i < zone_hi; ++i) mean += ma[i];
    mean /= static_cast<double>(w);
    double var = 0;
    for (Index i = zone_lo; i < zone_hi; ++i) {
        const double d = ma[i] - mean;
        var += d * d;
    }
    const double thr = mean + cfg.foot_threshold_k * std::sqrt(var / static_cast<double>(w));

    // Contiguous above-threshold runs; the run nearest the peak is the
    // current upstroke. The APG maximum inside it is the foot.
    Index best_run_lo = -1, best_run_hi = -1;
    Index run_lo = -1;
    for (Index i = zone_lo; i <= zone_hi; ++i) {
        const bool in = i < zone_hi && ma[i] > thr;
        if (in && run_lo < 0) run_lo = i;
        if (!in && run_lo >= 0) {
            best_run_lo = run_lo;
            best_run_hi = i;  // exclusive; later runs overwrite earlier ones
            run_lo = -1;
        }
    }

    if (best_run_lo < 0) {
        if (used_fallback) *used_fallback = true;
        const Index fb_lo = std::max<Index>(
            0, sys_idx - round_samples(cfg.foot_fallback_window_s, sample_rate_hz));
        Index best = fb_lo;
        for (Index i = fb_lo; i <= sys_idx; ++i)
            if (samples[i] < samples[best]) best = i;
        return best;
    }

    Index foot = best_run_lo;
    for (Index i = best_run_lo; i < best_run_hi; ++i)
        if (apg[i] > apg[foot]) foot = i;
    return foot;
}

Index fix_index(const Eigen::Ref<const Vec>& samples, Index idx,
                double window_ms, double sample_rate_hz, ExtremumMode mode,
                Index lo, Index hi) {
    const Index n = samples.size();
    if (idx < 0 || idx >= n) throw ArgumentError("fix_index: idx out of range");
    if (hi < 0) hi = n - 1;
    const Index half = std::max<Index>(
        0, round_samples(window_ms / 2000.0, sample_rate_hz));
    const Index w_lo = std::max<Index>({Index{0}, lo, idx - half});
    const Index w_hi = std::min<Index>({n - 1, hi, idx + half});

    // Strict-improvement scan ordered by distance from idx: ties (including
    // a constant window) resolve to idx.
    Index best = idx;
    auto consider = [&](Index i) {
        if (i < w_lo || i > w_hi) return;
        const bool better = mode == ExtremumMode::min ? samples[i] < samples[best]
                                                      : samples[i] > samples[best];
        if (better) best = i;
    };
    for (Index d = 1; d <= half; ++d) {
        consider(idx - d);
        consider(idx + d);
    }
    return best;
}

Index detect_notch(const Eigen::Ref<const Vec>& samples, Index sys_idx,
                   Index dia_idx, double sample_rate_hz, const Config& cfg) {
    if (dia_idx <= sys_idx + 2)
        throw GeometryError("detect_notch: peaks too close (dia <= sys + 2)");
    const double y0 = samples[sys_idx];
    const double slope = (samples[dia_idx] - y0) /
                         static_cast<double>(dia_idx - sys_idx);
    Index initial = sys_idx + 1;
    double best = std::numeric_limits<double>::infinity();
    for (Index i = sys_idx + 1; i < dia_idx; ++i) {
        const double chord = y0 + slope * static_cast<double>(i - sys_idx);
        const double d = samples[i] - chord;
        if (d < best) {
            best = d;
            initial = i;
        }
    }
    return fix_index(samples, initial, cfg.fix_window_ms, sample_rate_hz,
                     ExtremumMode::min, sys_idx + 1, dia_idx - 1);
}

Index detect_diastolic_peak(const Eigen::Ref<const Vec>& samples,
                            Index notch_idx, Index beat_end_idx,
                            bool* low_confidence) {
    if (low_confidence) *low_confidence = false;
    if (beat_end_idx - notch_idx < 2)
        throw GeometryError("detect_diastolic_peak: empty interval after notch");

    Index best = -1;
    for (Index i : detail::local_maxima(
             samples.segment(notch_idx, beat_end_idx - notch_idx + 1))) {
        const Index idx = notch_idx + i;
        if (best < 0 || samples[idx] > samples[best]) best = idx;
    }
    if (best >= 0) return best;

    // Monotone decay: take the inflection where the slope comes closest to
    // zero (the buried diastolic shoulder).
    if (low_confidence) *low_confidence = true;
    best = notch_idx + 1;
    double best_slope = -std::numeric_limits<double>::infinity();
    for (Index i = notch_idx + 1; i < beat_end_idx; ++i) {
        const double slope = (samples[i + 1] - samples[i - 1]) / 2.0;
        if (slope > best_slope) {
            best_slope = slope;
            best = i;
        }
    }
    return best;
}

void FiducialSet::check_invariants() const {
    auto fail = [](const std::string& what) {
        throw InvariantError("fiducials: " + what);
    };
    if (!(foot_idx < sys_idx && sys_idx < notch_idx && notch_idx < dia_idx))
        fail("landmark ordering foot < sys < notch < dia violated");
    if (!(0 < t1_s && t1_s < t2_s && t2_s < t3_s && t3_s < tpi_s))
        fail("time ordering 0 < t1 < t2 < t3 < tpi violated");
    if (!(x >= z && x >= y)) fail("systolic amplitude is not the beat maximum");
    if (!(ta1_s < tb1_s)) fail("ta1 >= tb1");
    if (!(ta2_s < tb2_s)) fail("ta2 >= tb2");
    if (!(tpp_s > 0)) fail("tpp <= 0");
}

namespace {

// First local extremum of d strictly inside (after_idx, end_idx); -1 when
// the stretch is monotone.
Index first_local_extremum(const Eigen::Ref<const Vec>& d, Index after_idx,
                           Index end_idx, bool maximum) {
    for (Index i = after_idx + 1; i < end_idx; ++i) {
        if (maximum ? (d[i] > d[i - 1] && d[i] >= d[i + 1])
                    : (d[i] < d[i - 1] && d[i] <= d[i + 1]))
            return i;
    }
    return -1;
}

Index arg_extremum(const Eigen::Ref<const Vec>& d, Index lo, Index hi,
                   bool maximum) {
    Index best = lo;
    for (Index i = lo; i <= hi; ++i) {
        if (maximum ? d[i] > d[best] : d[i] < d[best]) best = i;
    }
    return best;
}

struct BeatCandidate {
    FiducialSet fid;
    bool valid = false;
};

BeatCandidate build_beat(const Eigen::Ref<const Vec>& x,
                         const DerivativePair& deriv, double fs,
                         const std::vector<Index>& peaks, size_t b,
                         const Config& cfg) {
    BeatCandidate cand;
    FiducialSet& f = cand.fid;
    f.sample_rate_hz = fs;
    const Index n = x.size();
    const Index sys = peaks[b];

    try {
        bool foot_fb = false;
        const Index foot = detect_foot(x, deriv.d2, fs, sys, cfg, &foot_fb);
        if (foot_fb) f.flags.insert("foot_fallback");
        if (foot >= sys) return cand;

        Index end = n - 1;
        if (b + 1 < peaks.size()) {
            f.next_sys_idx = peaks[b + 1];
            bool nf_fb = false;
            const Index nf = detect_foot(x, deriv.d2, fs, peaks[b + 1], cfg, &nf_fb);
            end = nf > sys + 4 ? nf : peaks[b + 1];
        } else {
            f.flags.insert("pulse_end_fallback");
        }
        if (end <= sys + 4) return cand;

        // Provisional diastolic peak for the notch chord.
        Index pdia = -1;
        for (Index i : detail::local_maxima(x.segment(sys, end - sys + 1))) {
            const Index idx = sys + i;
            if (pdia < 0 || x[idx] > x[pdia]) pdia = idx;
        }
        if (pdia < 0) {
            f.flags.insert("dia_inflection");
            pdia = arg_extremum(deriv.d1, sys + 1, end - 1, /*maximum=*/true);
        }
        if (pdia <= sys + 2) return cand;

        const Index notch = detect_notch(x, sys, pdia, fs, cfg);
        bool dia_lc = false;
        const Index dia = detect_diastolic_peak(x, notch, end, &dia_lc);
        if (dia_lc) f.flags.insert("dia_inflection");

        f.foot_idx = foot;
        f.sys_idx = sys;
        f.notch_idx = notch;
        f.dia_idx = dia;
        f.beat_end_idx = end;
        f.foot_amplitude = x[foot];
        f.x = x[sys] - x[foot];
        f.y = x[dia] - x[foot];
        f.z = x[notch] - x[foot];
        f.t1_s = static_cast<double>(sys - foot) / fs;
        f.t2_s = static_cast<double>(notch - foot) / fs;
        f.t3_s = static_cast<double>(dia - foot) / fs;
        f.tpi_s = static_cast<double>(end - foot) / fs;
        if (f.next_sys_idx) {
            f.tpp_s = static_cast<double>(*f.next_sys_idx - sys) / fs;
        } else {
            f.tpp_s = f.tpi_s;
            f.flags.insert("tpp_fallback");
        }

        // Derivative landmarks: a1 on the upstroke, then the first minima /
        // maxima that follow it.
        f.a1_idx = arg_extremum(deriv.d1, foot + 1, sys, /*maximum=*/true);
        f.b1_idx = first_local_extremum(deriv.d1, f.a1_idx, end, /*maximum=*/false);
        if (f.b1_idx < 0) {
            f.b1_idx = arg_extremum(deriv.d1, f.a1_idx + 1, end, /*maximum=*/false);
            f.flags.insert("b1_fallback");
        }
        f.a2_idx = first_local_extremum(deriv.d2, f.a1_idx, end, /*maximum=*/true);
        if (f.a2_idx < 0) {
            f.a2_idx = arg_extremum(deriv.d2, f.a1_idx + 1, end, /*maximum=*/true);
            f.flags.insert("a2_fallback");
        }
        f.b2_idx = first_local_extremum(deriv.d2, f.a2_idx, end, /*maximum=*/false);
        if (f.b2_idx < 0) {
            f.b2_idx = arg_extremum(deriv.d2, f.a2_idx + 1, end, /*maximum=*/false);
            f.flags.insert("b2_fallback");
        }
        f.a1 = deriv.d1[f.a1_idx];
        f.b1 = deriv.d1[f.b1_idx];
        f.a2 = deriv.d2[f.a2_idx];
        f.b2 = deriv.d2[f.b2_idx];
        f.ta1_s = static_cast<double>(f.a1_idx - foot) / fs;
        f.tb1_s = static_cast<double>(f.b1_idx - foot) / fs;
        f.ta2_s = static_cast<double>(f.a2_idx - foot) / fs;
        f.tb2_s = static_cast<double>(f.b2_idx - foot) / fs;

        f.check_invariants();
        cand.valid = true;
    } catch (const Error&) {
        cand.valid = false;
    }
    return cand;
}

}  // namespace

FiducialSet extract_fiducials(const preprocess::CleanSignal& clean,
                              const Config& cfg) {
    const Vec& x = clean.samples;
    const double fs = clean.sample_rate_hz;
    const DerivativePair deriv = differentiate(x, fs);
    const std::vector<Index> peaks = detect_systolic_peaks(x, fs, cfg);

    std::optional<FiducialSet> first_valid;
    for (size_t b = 0; b < peaks.size(); ++b) {
        BeatCandidate cand = build_beat(x, deriv, fs, peaks, b, cfg);
        if (!cand.valid) continue;
        if (cand.fid.flags.empty()) return cand.fid;
        if (!first_valid) first_valid = cand.fid;
    }
    if (first_valid) {
        first_valid->flags.insert("low_confidence");
        return *first_valid;
    }
    throw NoBeatError("extract_fiducials: no complete beat resolved");
}

std::string debug_json(const FiducialSet& fid) {
    nlohmann::json j;
    j["indices"] = {
        {"foot", fid.foot_idx},   {"sys", fid.sys_idx},
        {"notch", fid.notch_idx}, {"dia", fid.dia_idx},
        {"beat_end", fid.beat_end_idx},
        {"a1", fid.a1_idx},       {"b1", fid.b1_idx},
        {"a2", fid.a2_idx},       {"b2", fid.b2_idx},
    };
    if (fid.next_sys_idx) j["indices"]["next_sys"] = *fid.next_sys_idx;
    j["times_s"] = {
        {"t1", fid.t1_s},   {"t2", fid.t2_s},   {"t3", fid.t3_s},
        {"tpi", fid.tpi_s}, {"tpp", fid.tpp_s}, {"ta1", fid.ta1_s},
        {"tb1", fid.tb1_s}, {"ta2", fid.ta2_s}, {"tb2", fid.tb2_s},
    };
    j["amplitudes"] = {
        {"x", fid.x}, {"y", fid.y}, {"z", fid.z},
        {"a1", fid.a1}, {"b1", fid.b1}, {"a2", fid.a2}, {"b2", fid.b2},
        {"foot", fid.foot_amplitude},
    };
    j["flags"] = fid.flags;
    return j.dump();
}

}  // namespace ppgbp::fiducials
