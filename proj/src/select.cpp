#include "ppgbp/select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ppgbp::select {

void FeatureMatrix::validate() const {
    if (x.rows() != y.size())
        throw ShapeError("feature matrix: row/target count mismatch");
    if (!column_names.empty() &&
        static_cast<Index>(column_names.size()) != x.cols())
        throw ShapeError("feature matrix: column name count mismatch");
    if (x.rows() < 10)
        throw ArgumentError("feature matrix: selection needs at least 10 rows");
    if (!x.allFinite() || !y.allFinite())
        throw ArgumentError("feature matrix: non-finite entries");
}

Vec rrelieff(const FeatureMatrix& m, int k_neighbors, int n_iterations,
             std::uint64_t seed) {
    m.validate();
    const Index n = m.x.rows();
    const Index d = m.x.cols();
    if (k_neighbors < 1) throw ArgumentError("rrelieff: k_neighbors must be >= 1");
    if (k_neighbors >= n)
        throw ArgumentError("rrelieff: k_neighbors must be < number of rows");

    // Min-max normalize features and target so diffs live in [0,1].
    Mat xn(n, d);
    for (Index j = 0; j < d; ++j) {
        const double lo = m.x.col(j).minCoeff();
        const double hi = m.x.col(j).maxCoeff();
        if (hi > lo)
            xn.col(j) = (m.x.col(j).array() - lo) / (hi - lo);
        else
            xn.col(j).setZero();  // constant column: diff 0 -> weight 0
    }
    const double y_lo = m.y.minCoeff();
    const double y_hi = m.y.maxCoeff();
    Vec yn(n);
    if (y_hi > y_lo)
        yn = (m.y.array() - y_lo) / (y_hi - y_lo);
    else
        return Vec::Zero(d);  // constant target: nothing to learn

    std::vector<Index> instances;
    if (n_iterations < 0 || n_iterations >= n) {
        instances.resize(static_cast<size_t>(n));
        std::iota(instances.begin(), instances.end(), Index{0});
    } else {
        std::vector<Index> idx(static_cast<size_t>(n));
        std::iota(idx.begin(), idx.end(), Index{0});
        std::mt19937_64 gen(seed);
        for (Index i = 0; i < n_iterations; ++i) {
            const Index j =
                i + static_cast<Index>(rng::bounded(
                        gen, static_cast<std::uint64_t>(n - i)));
            std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
        }
        instances.assign(idx.begin(), idx.begin() + n_iterations);
    }

    double n_dc = 0;                 // accumulated target diff
    Vec n_da = Vec::Zero(d);         // accumulated feature diff
    Vec n_dcda = Vec::Zero(d);       // accumulated joint diff
    const double w_neighbor = 1.0 / static_cast<double>(k_neighbors);

    std::vector<std::pair<double, Index>> dist(static_cast<size_t>(n));
    for (const Index i : instances) {
        for (Index j = 0; j < n; ++j) {
            const double dj =
                j == i ? std::numeric_limits<double>::infinity()
                       : (xn.row(j) - xn.row(i)).cwiseAbs().sum();
            dist[static_cast<size_t>(j)] = {dj, j};
        }
        std::partial_sort(dist.begin(), dist.begin() + k_neighbors, dist.end(),
                          [](const auto& a, const auto& b) {
                              if (a.first != b.first) return a.first < b.first;
                              return a.second < b.second;
                          });
        for (int k = 0; k < k_neighbors; ++k) {
            const Index j = dist[static_cast<size_t>(k)].second;
            const double d_target = std::abs(yn[j] - yn[i]);
            n_dc += d_target * w_neighbor;
            for (Index a = 0; a < d; ++a) {
                const double d_attr = std::abs(xn(j, a) - xn(i, a));
                n_da[a] += d_attr * w_neighbor;
                n_dcda[a] += d_target * d_attr * w_neighbor;
            }
        }
    }

    const double total = static_cast<double>(instances.size());
    Vec w(d);
    for (Index a = 0; a < d; ++a) {
        const double term1 = n_dc > 0 ? n_dcda[a] / n_dc : 0.0;
        const double rest = total - n_dc;
        const double term2 = rest > 0 ? (n_da[a] - n_dcda[a]) / rest : 0.0;
        w[a] = term1 - term2;
    }
    return w;
}

namespace {

// |Pearson correlation|; zero-variance columns yield 0.
double abs_corr(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b) {
    const double ma = a.mean();
    const double mb = b.mean();
    const auto ca = a.array() - ma;
    const auto cb = b.array() - mb;
    const double va = ca.square().sum();
    const double vb = cb.square().sum();
    if (!(va > 0) || !(vb > 0)) return 0.0;
    return std::abs(ca.matrix().dot(cb.matrix())) / std::sqrt(va * vb);
}

double cfs_merit(double sum_cf, double sum_ff, int k) {
    const double dk = static_cast<double>(k);
    const double mean_cf = sum_cf / dk;
    const double mean_ff = k > 1 ? sum_ff / (dk * (dk - 1) / 2.0) : 0.0;
    return dk * mean_cf / std::sqrt(dk + dk * (dk - 1) * mean_ff);
}

}  // namespace

std::vector<int> cfs_select(const FeatureMatrix& m,
                            std::vector<double>* merits) {
    m.validate();
    const Index d = m.x.cols();

    std::vector<int> usable;
    Vec r_cy = Vec::Zero(d);
    for (Index j = 0; j < d; ++j) {
        const double lo = m.x.col(j).minCoeff();
        const double hi = m.x.col(j).maxCoeff();
        if (hi > lo) {
            usable.push_back(static_cast<int>(j));
            r_cy[j] = abs_corr(m.x.col(j), m.y);
        }
    }
    if (usable.empty()) return {};

    Mat r_ff = Mat::Constant(d, d, -1.0);  // lazy |corr| cache
    auto ff = [&](int a, int b) {
        if (r_ff(a, b) < 0) {
            const double c = abs_corr(m.x.col(a), m.x.col(b));
            r_ff(a, b) = c;
            r_ff(b, a) = c;
        }
        return r_ff(a, b);
    };

    std::vector<int> chosen;
    std::vector<bool> in_set(static_cast<size_t>(d), false);
    double current_merit = -1.0;
    double sum_cf = 0.0, sum_ff = 0.0;
    if (merits) merits->clear();

    for (;;) {
        int best = -1;
        double best_merit = current_merit;
        double best_cf = 0, best_ff = 0;
        for (int j : usable) {
            if (in_set[static_cast<size_t>(j)]) continue;
            double add_ff = 0;
            for (int g : chosen) add_ff += ff(j, g);
            const double merit =
                cfs_merit(sum_cf + r_cy[j], sum_ff + add_ff,
                          static_cast<int>(chosen.size()) + 1);
            if (merit > best_merit + 1e-12) {
                best_merit = merit;
                best = j;
                best_cf = r_cy[j];
                best_ff = add_ff;
            }
        }
        if (best < 0) break;
        chosen.push_back(best);
        in_set[static_cast<size_t>(best)] = true;
        sum_cf += best_cf;
        sum_ff += best_ff;
        current_merit = best_merit;
        if (merits) merits->push_back(best_merit);
    }
    return chosen;
}

namespace {

// Equal-frequency discretization via type-7 quantile edges.
std::vector<int> discretize(const Eigen::Ref<const Vec>& v, int bins) {
    const Index n = v.size();
    std::vector<double> sorted(v.data(), v.data() + n);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edges;
    edges.reserve(static_cast<size_t>(bins) - 1);
    for (int b = 1; b < bins; ++b) {
        const double q = static_cast<double>(b) / static_cast<double>(bins);
        const double h = q * static_cast<double>(n - 1);
        const size_t k = static_cast<size_t>(std::floor(h));
        const double e =
            k + 1 < static_cast<size_t>(n)
                ? sorted[k] + (h - std::floor(h)) * (sorted[k + 1] - sorted[k])
                : sorted[static_cast<size_t>(n) - 1];
        edges.push_back(e);
    }
    std::vector<int> out(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) {
        out[static_cast<size_t>(i)] = static_cast<int>(
            std::upper_bound(edges.begin(), edges.end(), v[i]) - edges.begin());
    }
    return out;
}

// Plug-in mutual information in bits between two discrete columns.
double mutual_information(const std::vector<int>& a, const std::vector<int>& b,
                          int bins) {
    const size_t n = a.size();
    std::vector<double> joint(static_cast<size_t>(bins) * bins, 0.0);
    std::vector<double> pa(static_cast<size_t>(bins), 0.0);
    std::vector<double> pb(static_cast<size_t>(bins), 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
        joint[static_cast<size_t>(a[i]) * bins + b[i]] += inv_n;
        pa[static_cast<size_t>(a[i])] += inv_n;
        pb[static_cast<size_t>(b[i])] += inv_n;
    }
    double mi = 0;
    for (int i = 0; i < bins; ++i) {
        for (int j = 0; j < bins; ++j) {
            const double p = joint[static_cast<size_t>(i) * bins + j];
            if (p > 0) mi += p * std::log2(p / (pa[static_cast<size_t>(i)] *
                                                pb[static_cast<size_t>(j)]));
        }
    }
    return mi;
}

}  // namespace

MrmrResult mrmr_rank(const FeatureMatrix& m, int n_select, int bins) {
    m.validate();
    const Index d = m.x.cols();
    if (n_select < 1 || n_select > d)
        throw ArgumentError("mrmr: n_select out of range");
    if (bins < 2) throw ArgumentError("mrmr: bins must be >= 2");

    std::vector<std::vector<int>> disc(static_cast<size_t>(d));
    for (Index j = 0; j < d; ++j)
        disc[static_cast<size_t>(j)] = discretize(m.x.col(j), bins);
    const std::vector<int> target = discretize(m.y, bins);

    Vec relevance(d);
    for (Index j = 0; j < d; ++j)
        relevance[j] = mutual_information(disc[static_cast<size_t>(j)], target, bins);

    Mat redundancy = Mat::Constant(d, d, -1.0);
    auto red = [&](Index a, Index b) {
        if (redundancy(a, b) < 0) {
            const double mi = mutual_information(disc[static_cast<size_t>(a)],
                                                 disc[static_cast<size_t>(b)], bins);
            redundancy(a, b) = mi;
            redundancy(b, a) = mi;
        }
        return redundancy(a, b);
    };

    MrmrResult result;
    std::vector<bool> picked(static_cast<size_t>(d), false);
    for (int step = 0; step < n_select; ++step) {
        int best = -1;
        double best_score = -std::numeric_limits<double>::infinity();
        for (Index j = 0; j < d; ++j) {
            if (picked[static_cast<size_t>(j)]) continue;
            double score = relevance[j];
            if (!result.ranked.empty()) {
                double mean_red = 0;
                for (int g : result.ranked) mean_red += red(j, g);
                score -= mean_red / static_cast<double>(result.ranked.size());
            }
            if (score > best_score) {  // strict: ties keep the lower index
                best_score = score;
                best = static_cast<int>(j);
            }
        }
        result.ranked.push_back(best);
        result.scores.push_back(best_score);
        picked[static_cast<size_t>(best)] = true;
    }
    return result;
}

std::vector<int> select_top_k(const Eigen::Ref<const Vec>& weights, int k) {
    const Index d = weights.size();
    if (k < 0 || k > d) throw ArgumentError("select_top_k: k out of range");
    std::vector<int> idx(static_cast<size_t>(d));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (weights[a] != weights[b]) return weights[a] > weights[b];
        return a < b;
    });
    idx.resize(static_cast<size_t>(k));
    return idx;
}

SelectionResult run_method(const FeatureMatrix& m, const std::string& method,
                           int n_select, int relieff_k_neighbors,
                           int mrmr_bins) {
    SelectionResult r;
    r.method = method;
    const Index d = m.x.cols();
    if (method == "relieff") {
        r.weights = rrelieff(m, relieff_k_neighbors);
        r.ranked = select_top_k(r.weights, static_cast<int>(d));
        r.chosen = select_top_k(r.weights, std::min<int>(n_select, static_cast<int>(d)));
    } else if (method == "mrmr") {
        MrmrResult mr = mrmr_rank(m, std::min<int>(n_select, static_cast<int>(d)),
                                  mrmr_bins);
        r.ranked = mr.ranked;
        r.chosen = mr.ranked;
        r.weights = Vec::Zero(d);
        for (size_t i = 0; i < mr.ranked.size(); ++i)
            r.weights[mr.ranked[i]] = mr.scores[i];
    } else if (method == "cfs") {
        std::vector<double> merits;
        r.chosen = cfs_select(m, &merits);
        r.ranked = r.chosen;
        r.weights = Vec::Zero(d);
        for (size_t i = 0; i < r.chosen.size(); ++i)
            r.weights[r.chosen[i]] = merits[i];
    } else if (method == "none") {
        r.ranked.resize(static_cast<size_t>(d));
        std::iota(r.ranked.begin(), r.ranked.end(), 0);
        r.chosen = r.ranked;
        r.weights = Vec::Ones(d);
    } else {
        throw ArgumentError("unknown selection method \"" + method + "\"");
    }
    return r;
}

}  // namespace ppgbp::select
