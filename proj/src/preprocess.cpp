#include "ppgbp/preprocess.hpp"

#include <Eigen/QR>

#include <cmath>
#include <complex>
#include <numbers>

namespace ppgbp::preprocess {

namespace {

constexpr double kPi = std::numbers::pi;

double sample_stddev(const Eigen::Ref<const Vec>& x, double mean) {
    const Index n = x.size();
    const double ss = (x.array() - mean).square().sum();
    return std::sqrt(ss / static_cast<double>(n - 1));
}

}  // namespace

Vec zscore_normalize(const Eigen::Ref<const Vec>& x) {
    if (x.size() < 2) throw ArgumentError("zscore: need at least 2 samples");
    const double mean = x.mean();
    const double sd = sample_stddev(x, mean);
    if (!(sd > 0))
        throw DegenerateSignalError("zscore: constant signal (zero stddev)");
    return (x.array() - mean) / sd;
}

Index FilterDesign::transient_pad() const {
    // Slowest analog pole has |Re| = warped * sin(pi/(2N)); size the pad so
    // exp(-|Re| * pad / fs) < 1e-10.
    const double warped =
        2.0 * sample_rate_hz * std::tan(kPi * cutoff_hz / sample_rate_hz);
    const double re_min = warped * std::sin(kPi / (2.0 * order));
    const double decay_len = std::log(1e10) * sample_rate_hz / re_min;
    const Index min_pad = 3 * (static_cast<Index>(order) + 1);
    return std::max(min_pad, static_cast<Index>(std::ceil(decay_len)));
}

FilterDesign butterworth_lowpass(int order, double cutoff_hz,
                                 double sample_rate_hz) {
    if (order <= 0 || order % 2 != 0)
        throw ArgumentError("butterworth: order must be a positive even integer");
    if (!(sample_rate_hz > 0))
        throw ArgumentError("butterworth: sample rate must be positive");
    if (!(cutoff_hz > 0) || cutoff_hz >= sample_rate_hz / 2.0)
        throw ArgumentError("butterworth: cutoff must lie in (0, Nyquist)");

    FilterDesign d;
    d.order = order;
    d.cutoff_hz = cutoff_hz;
    d.sample_rate_hz = sample_rate_hz;

    // Bilinear transform with frequency pre-warping; conjugate analog pole
    // pairs map to one biquad each.
    const double k = 2.0 * sample_rate_hz;
    const double warped = k * std::tan(kPi * cutoff_hz / sample_rate_hz);
    const int n_pairs = order / 2;
    d.sections.reserve(n_pairs);
    for (int i = 0; i < n_pairs; ++i) {
        const double theta =
            kPi / 2.0 + (2.0 * i + 1.0) * kPi / (2.0 * order);
        const std::complex<double> pole =
            warped * std::polar(1.0, theta);
        const std::complex<double> zp = (k + pole) / (k - pole);
        Biquad s;
        s.a1 = -2.0 * zp.real();
        s.a2 = std::norm(zp);
        // Zeros at z = -1 (b ~ [1,2,1]); scale for unit DC gain.
        const double g = (1.0 + s.a1 + s.a2) / 4.0;
        s.b0 = g;
        s.b1 = 2.0 * g;
        s.b2 = g;
        d.sections.push_back(s);
    }
    return d;
}

Vec sosfilt(const FilterDesign& d, const Eigen::Ref<const Vec>& x) {
    Vec y = x;
    for (const Biquad& s : d.sections) {
        // Direct form II transposed.
        double z1 = 0, z2 = 0;
        for (Index i = 0; i < y.size(); ++i) {
            const double in = y[i];
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            y[i] = out;
        }
    }
    return y;
}

Vec lowpass_zero_phase(const Eigen::Ref<const Vec>& x, double sample_rate_hz,
                       int order, double cutoff_hz) {
    const FilterDesign d = butterworth_lowpass(order, cutoff_hz, sample_rate_hz);
    const Index n = x.size();
    const Index min_pad = 3 * (static_cast<Index>(order) + 1);
    if (n <= min_pad)
        throw LengthError("lowpass_zero_phase: signal too short for padding (" +
                          std::to_string(n) + " <= " + std::to_string(min_pad) +
                          ")");
    const Index pad = std::min(n - 1, d.transient_pad());

    // Odd (reflect-and-negate) extension about both endpoints.
    Vec ext(n + 2 * pad);
    for (Index i = 0; i < pad; ++i)
        ext[i] = 2.0 * x[0] - x[pad - i];
    ext.segment(pad, n) = x;
    for (Index i = 0; i < pad; ++i)
        ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

    Vec fwd = sosfilt(d, ext);
    Vec bwd = sosfilt(d, fwd.reverse());
    return bwd.reverse().segment(pad, n);
}

Vec detrend_polynomial(const Eigen::Ref<const Vec>& x, int degree) {
    const Index n = x.size();
    if (degree < 0) throw ArgumentError("detrend: negative degree");
    if (n <= static_cast<Index>(degree) + 1)
        throw ArgumentError("detrend: need more than degree+1 samples");

    // Legendre basis over t in [-1,1] keeps the normal equations
    // well-conditioned at degree 4, length 2100.
    Mat basis(n, degree + 1);
    for (Index i = 0; i < n; ++i) {
        const double t =
            n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) /
                                      static_cast<double>(n - 1);
        basis(i, 0) = 1.0;
        if (degree >= 1) basis(i, 1) = t;
        for (int d = 2; d <= degree; ++d) {
            basis(i, d) = ((2.0 * d - 1.0) * t * basis(i, d - 1) -
                           (d - 1.0) * basis(i, d - 2)) /
                          static_cast<double>(d);
        }
    }
    Vec coef = basis.colPivHouseholderQr().solve(x);
    return x - basis * coef;
}

namespace {

template <class F>
Vec run_stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const DegenerateSignalError& e) {
        throw DegenerateSignalError(std::string(name) + ": " + e.what());
    } catch (const LengthError& e) {
        throw LengthError(std::string(name) + ": " + e.what());
    } catch (const ArgumentError& e) {
        throw ArgumentError(std::string(name) + ": " + e.what());
    }
}

}  // namespace

CleanSignal run(const Eigen::Ref<const Vec>& raw_samples, double sample_rate_hz,
                const Config& cfg) {
    CleanSignal out;
    out.sample_rate_hz = sample_rate_hz;
    out.samples = raw_samples;
    if (cfg.normalize) {
        out.samples = run_stage("zscore",
                                [&] { return zscore_normalize(out.samples); });
        out.provenance.push_back("zscore");
    }
    if (cfg.filter) {
        out.samples = run_stage("butterworth_zero_phase", [&] {
            return lowpass_zero_phase(out.samples, sample_rate_hz,
                                      cfg.filter_order, cfg.filter_cutoff_hz);
        });
        out.provenance.push_back("butterworth_zero_phase");
    }
    if (cfg.detrend) {
        out.samples = run_stage("poly_detrend", [&] {
            return detrend_polynomial(out.samples, cfg.detrend_degree);
        });
        out.provenance.push_back("poly_detrend");
    }
    return out;
}

}  // namespace ppgbp::preprocess
