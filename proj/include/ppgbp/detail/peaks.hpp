#pragma once

#include "ppgbp/types.hpp"

#include <algorithm>
#include <vector>

namespace ppgbp::detail {

// Plateau-aware local maxima: index reported at the left-middle of a flat
// top. Endpoints never qualify.
inline std::vector<Index> local_maxima(const Eigen::Ref<const Vec>& x) {
    std::vector<Index> peaks;
    const Index n = x.size();
    Index i = 1;
    while (i < n - 1) {
        if (x[i] > x[i - 1]) {
            Index j = i;
            while (j < n - 1 && x[j + 1] == x[i]) ++j;
            if (j < n - 1 && x[j + 1] < x[i]) peaks.push_back((i + j) / 2);
            i = j + 1;
        } else {
            ++i;
        }
    }
    return peaks;
}

inline std::vector<Index> local_minima(const Eigen::Ref<const Vec>& x) {
    return local_maxima(-x);
}

// Topographic prominence: height above the higher of the two valley floors
// reached before a taller sample (or the signal edge) in each direction.
inline double peak_prominence(const Eigen::Ref<const Vec>& x, Index peak) {
    const Index n = x.size();
    double left_min = x[peak];
    for (Index i = peak - 1; i >= 0; --i) {
        if (x[i] > x[peak]) break;
        left_min = std::min(left_min, x[i]);
    }
    double right_min = x[peak];
    for (Index i = peak + 1; i < n; ++i) {
        if (x[i] > x[peak]) break;
        right_min = std::min(right_min, x[i]);
    }
    return x[peak] - std::max(left_min, right_min);
}

struct ProminentPeak {
    Index index;
    double prominence;
};

// Local maxima with prominence >= min_prominence, ascending by index.
inline std::vector<ProminentPeak> prominent_maxima(
    const Eigen::Ref<const Vec>& x, double min_prominence) {
    std::vector<ProminentPeak> out;
    for (Index p : local_maxima(x)) {
        const double prom = peak_prominence(x, p);
        if (prom >= min_prominence) out.push_back({p, prom});
    }
    return out;
}

// Greedy minimum-distance thinning, strongest prominence first; result
// ascending by index.
inline std::vector<Index> enforce_min_distance(std::vector<ProminentPeak> peaks,
                                               Index min_distance) {
    std::stable_sort(peaks.begin(), peaks.end(),
                     [](const ProminentPeak& a, const ProminentPeak& b) {
                         if (a.prominence != b.prominence)
                             return a.prominence > b.prominence;
                         return a.index < b.index;
                     });
    std::vector<Index> kept;
    for (const ProminentPeak& p : peaks) {
        bool ok = true;
        for (Index k : kept) {
            if (std::abs(k - p.index) < min_distance) {
                ok = false;
                break;
            }
        }
        if (ok) kept.push_back(p.index);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

}  // namespace ppgbp::detail
