#include "ppgbp/regress.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace ppgbp::regress {

// ---------------------------------------------------------------------------
// Standardizer

Standardizer Standardizer::fit(const Eigen::Ref<const Mat>& x,
                               const std::vector<std::string>* names) {
    const Index n = x.rows();
    const Index d = x.cols();
    if (n < 1) throw ArgumentError("standardizer: empty matrix");

    Standardizer s;
    std::vector<double> means, stds;
    for (Index j = 0; j < d; ++j) {
        const double mean = x.col(j).mean();
        const double ss = (x.col(j).array() - mean).square().sum();
        const double sd =
            n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        if (sd > 0) {
            s.kept.push_back(static_cast<int>(j));
            means.push_back(mean);
            stds.push_back(sd);
        } else {
            s.dropped_names.push_back(
                names && j < static_cast<Index>(names->size())
                    ? (*names)[static_cast<size_t>(j)]
                    : "column " + std::to_string(j));
        }
    }
    s.mean = Eigen::Map<const Vec>(means.data(), static_cast<Index>(means.size()));
    s.stddev = Eigen::Map<const Vec>(stds.data(), static_cast<Index>(stds.size()));
    return s;
}

Mat Standardizer::apply(const Eigen::Ref<const Mat>& x) const {
    if (identity()) return x;
    const Index k = static_cast<Index>(kept.size());
    if (x.cols() < k)
        throw ShapeError("standardizer: input has fewer columns than fitted");
    Mat out(x.rows(), k);
    for (Index j = 0; j < k; ++j)
        out.col(j) = (x.col(kept[static_cast<size_t>(j)]).array() - mean[j]) / stddev[j];
    return out;
}

// ---------------------------------------------------------------------------
// GPR

KernelFamily kernel_from_string(const std::string& s) {
    if (s == "squared_exponential" || s == "se" || s == "rbf")
        return KernelFamily::squared_exponential;
    if (s == "matern52" || s == "matern_5_2")
        return KernelFamily::matern52;
    throw ArgumentError("unknown kernel \"" + s + "\"");
}

std::string to_string(KernelFamily k) {
    return k == KernelFamily::squared_exponential ? "squared_exponential"
                                                  : "matern52";
}

double kernel_value(const KernelSpec& k, double squared_distance) {
    const double r2 = squared_distance;
    switch (k.family) {
        case KernelFamily::squared_exponential:
            return k.sigma_f2 *
                   std::exp(-r2 / (2.0 * k.length_scale * k.length_scale));
        case KernelFamily::matern52: {
            const double r = std::sqrt(std::max(r2, 0.0));
            const double u = std::sqrt(5.0) * r / k.length_scale;
            return k.sigma_f2 * (1.0 + u + u * u / 3.0) * std::exp(-u);
        }
    }
    return 0.0;
}

namespace {

void check_hyper(const KernelSpec& k) {
    if (!(k.sigma_f2 > 0 && k.length_scale > 0 && k.sigma_n2 > 0))
        throw ArgumentError("gpr: hyperparameters must be positive");
}

Mat kernel_matrix(const KernelSpec& k, const Eigen::Ref<const Mat>& a,
                  const Eigen::Ref<const Mat>& b) {
    Mat out(a.rows(), b.rows());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < b.rows(); ++j)
            out(i, j) = kernel_value(k, (a.row(i) - b.row(j)).squaredNorm());
    return out;
}

}  // namespace

GprModel gpr_fit(const Eigen::Ref<const Mat>& x, const Eigen::Ref<const Vec>& y,
                 const KernelSpec& kernel) {
    check_hyper(kernel);
    const Index n = x.rows();
    if (n < 1 || n != y.size())
        throw ShapeError("gpr_fit: bad training shapes");

    GprModel m;
    m.kernel = kernel;
    m.train_x = x;
    m.train_y = y;

    Mat a = kernel_matrix(kernel, x, x);
    a.diagonal().array() += kernel.sigma_n2;
    const double mean_diag = a.trace() / static_cast<double>(n);

    Eigen::LLT<Mat> llt;
    double jitter = 0.0;
    for (const double scale : {0.0, 1e-10, 1e-8, 1e-6}) {
        Mat attempt = a;
        jitter = scale * mean_diag;
        attempt.diagonal().array() += jitter;
        llt.compute(attempt);
        if (llt.info() == Eigen::Success) {
            m.chol_l = llt.matrixL();
            m.jitter = jitter;
            m.alpha = llt.solve(y);
            return m;
        }
    }
    throw ConditioningError(
        "gpr_fit: kernel matrix not positive definite after jitter escalation");
}

GprModel gpr_fit_standardized(const Eigen::Ref<const Mat>& x,
                              const Eigen::Ref<const Vec>& y,
                              const KernelSpec& kernel) {
    Standardizer sx = Standardizer::fit(x);
    if (sx.kept.empty())
        throw DegenerateSignalError("gpr: every feature column is constant");
    const Mat xs = sx.apply(x);

    const Index n = y.size();
    const double y_mean = y.mean();
    double y_std = 1.0;
    if (n > 1) {
        const double ss = (y.array() - y_mean).square().sum();
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        if (sd > 0) y_std = sd;
    }
    const Vec ys = (y.array() - y_mean) / y_std;

    GprModel m = gpr_fit(xs, ys, kernel);
    m.std_x = std::move(sx);
    m.y_mean = y_mean;
    m.y_std = y_std;
    return m;
}

GprPrediction gpr_predict(const GprModel& model, const Eigen::Ref<const Mat>& x) {
    const Mat xs = model.std_x.identity() ? Mat(x) : model.std_x.apply(x);
    if (xs.cols() != model.train_x.cols())
        throw ShapeError("gpr_predict: feature count mismatch (" +
                         std::to_string(xs.cols()) + " vs " +
                         std::to_string(model.train_x.cols()) + ")");

    const Mat ks = kernel_matrix(model.kernel, model.train_x, xs);  // N x M
    GprPrediction p;
    p.mean = ks.transpose() * model.alpha;

    const Mat v = model.chol_l.triangularView<Eigen::Lower>().solve(ks);
    const double prior = kernel_value(model.kernel, 0.0) + model.kernel.sigma_n2;
    p.variance.resize(xs.rows());
    for (Index j = 0; j < xs.rows(); ++j) {
        double var = prior - v.col(j).squaredNorm();
        if (var < 0) {
            var = 0;
            ++p.clamped;
        }
        p.variance[j] = var;
    }

    if (model.y_std != 1.0 || model.y_mean != 0.0) {
        p.mean = (p.mean.array() * model.y_std + model.y_mean).matrix();
        p.variance *= model.y_std * model.y_std;
    }
    return p;
}

double gpr_nlml(const GprModel& model) {
    const Index n = model.train_y.size();
    const double data_term = 0.5 * model.train_y.dot(model.alpha);
    const double logdet_term = model.chol_l.diagonal().array().log().sum();
    return data_term + logdet_term +
           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

// ---------------------------------------------------------------------------
// Bagged regression trees

double Tree::predict(const Eigen::Ref<const Vec>& row) const {
    int i = 0;
    while (nodes[static_cast<size_t>(i)].feature >= 0) {
        const TreeNode& nd = nodes[static_cast<size_t>(i)];
        i = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<size_t>(i)].value;
}

namespace {

struct SplitSearch {
    const Mat& x;
    const Vec& y;
    int min_leaf;

    // Returns false when the node must become a leaf.
    bool best_split(const std::vector<int>& rows, int& feature,
                    double& threshold) const {
        const int n = static_cast<int>(rows.size());
        if (n < 2 * min_leaf) return false;

        double total = 0;
        for (int r : rows) total += y[r];

        double best_sse = std::numeric_limits<double>::infinity();
        feature = -1;
        std::vector<std::pair<double, double>> vals(static_cast<size_t>(n));
        for (Index f = 0; f < x.cols(); ++f) {
            for (int i = 0; i < n; ++i)
                vals[static_cast<size_t>(i)] = {x(rows[static_cast<size_t>(i)], f),
                                                y[rows[static_cast<size_t>(i)]]};
            std::sort(vals.begin(), vals.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            double left_sum = 0, left_sq = 0;
            double right_sum = total;
            double right_sq = 0;
            for (const auto& [v, t] : vals) right_sq += t * t;

            for (int i = 0; i < n - 1; ++i) {
                const double t = vals[static_cast<size_t>(i)].second;
                left_sum += t;
                left_sq += t * t;
                right_sum -= t;
                right_sq -= t * t;
                const int nl = i + 1, nr = n - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                if (vals[static_cast<size_t>(i)].first ==
                    vals[static_cast<size_t>(i) + 1].first)
                    continue;  // can only split between distinct values
                const double sse = (left_sq - left_sum * left_sum / nl) +
                                   (right_sq - right_sum * right_sum / nr);
                if (sse < best_sse - 1e-12) {
                    best_sse = sse;
                    feature = static_cast<int>(f);
                    threshold = 0.5 * (vals[static_cast<size_t>(i)].first +
                                       vals[static_cast<size_t>(i) + 1].first);
                }
            }
        }
        return feature >= 0;
    }
};

Tree build_tree(const Mat& x, const Vec& y, const std::vector<int>& sample,
                int min_leaf) {
    Tree tree;
    const SplitSearch search{x, y, min_leaf};

    struct Work {
        std::vector<int> rows;
        int node;
    };
    tree.nodes.emplace_back();
    std::vector<Work> stack{{sample, 0}};
    while (!stack.empty()) {
        Work w = std::move(stack.back());
        stack.pop_back();

        double mean = 0;
        for (int r : w.rows) mean += y[r];
        mean /= static_cast<double>(w.rows.size());

        int feature = -1;
        double threshold = 0;
        if (!search.best_split(w.rows, feature, threshold)) {
            tree.nodes[static_cast<size_t>(w.node)].value = mean;
            continue;
        }
        std::vector<int> left, right;
        for (int r : w.rows)
            (x(r, feature) <= threshold ? left : right).push_back(r);

        TreeNode& nd = tree.nodes[static_cast<size_t>(w.node)];
        nd.feature = feature;
        nd.threshold = threshold;
        nd.left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        nd.right = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        stack.push_back({std::move(right), tree.nodes[static_cast<size_t>(w.node)].right});
        stack.push_back({std::move(left), tree.nodes[static_cast<size_t>(w.node)].left});
    }
    return tree;
}

}  // namespace

TreeEnsemble forest_fit(const Eigen::Ref<const Mat>& x,
                        const Eigen::Ref<const Vec>& y, int n_trees,
                        int min_leaf, std::uint64_t seed) {
    const Index n = x.rows();
    if (n < 1 || n != y.size()) throw ShapeError("forest_fit: bad shapes");
    if (n_trees < 1) throw ArgumentError("forest_fit: n_trees must be >= 1");
    if (min_leaf < 1 || min_leaf > n)
        throw ArgumentError("forest_fit: min_leaf must lie in [1, N]");

    const Mat xm = x;
    const Vec ym = y;
    TreeEnsemble ens;
    ens.n_features = static_cast<int>(x.cols());
    ens.min_leaf = min_leaf;
    ens.seed = seed;
    ens.trees.resize(static_cast<size_t>(n_trees));
    for (int t = 0; t < n_trees; ++t) {
        std::mt19937_64 gen(rng::mix(seed, static_cast<std::uint64_t>(t)));
        std::vector<int> sample(static_cast<size_t>(n));
        for (Index i = 0; i < n; ++i)
            sample[static_cast<size_t>(i)] = static_cast<int>(
                rng::bounded(gen, static_cast<std::uint64_t>(n)));
        ens.trees[static_cast<size_t>(t)] = build_tree(xm, ym, sample, min_leaf);
    }
    return ens;
}

Vec forest_predict(const TreeEnsemble& ens, const Eigen::Ref<const Mat>& x) {
    if (x.cols() != ens.n_features)
        throw ShapeError("forest_predict: feature count mismatch");
    Vec out = Vec::Zero(x.rows());
    for (const Tree& tree : ens.trees) {
        for (Index i = 0; i < x.rows(); ++i)
            out[i] += tree.predict(x.row(i).transpose());
    }
    return out / static_cast<double>(ens.trees.size());
}

// ---------------------------------------------------------------------------
// Cross-validation

CvReport kfold_cv(const Eigen::Ref<const Mat>& x, const Eigen::Ref<const Vec>& y,
                  int k, const Trainer& trainer, std::uint64_t seed) {
    const Index n = x.rows();
    if (n != y.size()) throw ShapeError("kfold_cv: bad shapes");
    if (k < 2) throw ArgumentError("kfold_cv: k must be >= 2");
    if (k > n) throw ArgumentError("kfold_cv: k exceeds row count");

    std::vector<Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 gen(seed);
    for (Index i = n - 1; i > 0; --i) {
        const Index j = static_cast<Index>(
            rng::bounded(gen, static_cast<std::uint64_t>(i) + 1));
        std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }

    CvReport report;
    report.seed = seed;
    report.assignment.assign(static_cast<size_t>(n), -1);
    const Index base = n / k, extra = n % k;
    Index pos = 0;
    std::vector<std::vector<Index>> folds(static_cast<size_t>(k));
    for (int f = 0; f < k; ++f) {
        const Index size = base + (f < extra ? 1 : 0);
        for (Index i = 0; i < size; ++i) {
            const Index row = order[static_cast<size_t>(pos++)];
            folds[static_cast<size_t>(f)].push_back(row);
            report.assignment[static_cast<size_t>(row)] = f;
        }
    }

    report.oof_predictions.resize(n);
    for (int f = 0; f < k; ++f) {
        const auto& test_rows = folds[static_cast<size_t>(f)];
        const Index nt = static_cast<Index>(test_rows.size());
        Mat train_x(n - nt, x.cols());
        Vec train_y(n - nt);
        Index r = 0;
        for (Index i = 0; i < n; ++i) {
            if (report.assignment[static_cast<size_t>(i)] == f) continue;
            train_x.row(r) = x.row(i);
            train_y[r] = y[i];
            ++r;
        }
        Mat test_x(nt, x.cols());
        for (Index i = 0; i < nt; ++i) test_x.row(i) = x.row(test_rows[static_cast<size_t>(i)]);

        const Predictor predict = trainer(train_x, train_y);
        const Vec pred = predict(test_x);
        if (pred.size() != nt)
            throw ShapeError("kfold_cv: predictor returned wrong length");

        eval::PredictionSet fold_set;
        fold_set.predicted = pred;
        fold_set.actual.resize(nt);
        for (Index i = 0; i < nt; ++i) {
            fold_set.actual[i] = y[test_rows[static_cast<size_t>(i)]];
            report.oof_predictions[test_rows[static_cast<size_t>(i)]] = pred[i];
        }
        CvReport::Fold fold;
        fold.metrics = eval::regression_metrics(fold_set, /*require_r=*/false);
        fold.size = static_cast<int>(nt);
        report.folds.push_back(std::move(fold));
    }

    eval::PredictionSet pooled;
    pooled.predicted = report.oof_predictions;
    pooled.actual = y;
    report.aggregate = eval::regression_metrics(pooled, /*require_r=*/false);
    return report;
}

// ---------------------------------------------------------------------------
// GPR hyperparameter search

namespace {

struct ParamPoint {
    double family;   // 0 = SE, 1 = Matern52
    double u_ell, u_sf2, u_sn2;  // unit-cube coordinates

    KernelSpec to_spec(const TuneOptions& o) const {
        KernelSpec k;
        k.family = family < 0.5 ? KernelFamily::squared_exponential
                                : KernelFamily::matern52;
        k.length_scale = std::pow(10.0, o.log_ell_lo + u_ell * (o.log_ell_hi - o.log_ell_lo));
        k.sigma_f2 = std::pow(10.0, o.log_sf2_lo + u_sf2 * (o.log_sf2_hi - o.log_sf2_lo));
        k.sigma_n2 = std::pow(10.0, o.log_sn2_lo + u_sn2 * (o.log_sn2_hi - o.log_sn2_lo));
        return k;
    }

    Vec coords() const {
        Vec v(4);
        v << family, u_ell, u_sf2, u_sn2;
        return v;
    }
};

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

TuneResult tune_gpr(const Eigen::Ref<const Mat>& x,
                    const Eigen::Ref<const Vec>& y, int budget,
                    std::uint64_t seed, const TuneOptions& opts) {
    if (budget < 1) throw ArgumentError("tune_gpr: budget must be >= 1");
    const int folds = std::min<int>(opts.cv_folds, static_cast<int>(x.rows()));
    const std::uint64_t fold_seed = rng::mix(seed, 0xF01Dull);

    auto objective = [&](const KernelSpec& k) -> double {
        try {
            const Trainer trainer = [&k](const Eigen::Ref<const Mat>& tx,
                                         const Eigen::Ref<const Vec>& ty) {
                GprModel m = gpr_fit_standardized(tx, ty, k);
                return Predictor([m = std::move(m)](const Eigen::Ref<const Mat>& px) {
                    return gpr_predict(m, px).mean;
                });
            };
            return kfold_cv(x, y, folds, trainer, fold_seed).aggregate.mse;
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    TuneResult result;
    std::mt19937_64 gen(rng::mix(seed, 0xACC0ull));
    auto random_point = [&]() {
        ParamPoint p;
        p.family = static_cast<double>(rng::bounded(gen, 2));
        p.u_ell = rng::uniform01(gen);
        p.u_sf2 = rng::uniform01(gen);
        p.u_sn2 = rng::uniform01(gen);
        return p;
    };

    // The untuned default is always candidate zero, so the search can never
    // do worse than it.
    std::vector<ParamPoint> pending;
    {
        ParamPoint def;
        def.family = 0;
        def.u_ell = (0.0 - opts.log_ell_lo) / (opts.log_ell_hi - opts.log_ell_lo);
        def.u_sf2 = (0.0 - opts.log_sf2_lo) / (opts.log_sf2_hi - opts.log_sf2_lo);
        def.u_sn2 = (-1.0 - opts.log_sn2_lo) / (opts.log_sn2_hi - opts.log_sn2_lo);
        pending.push_back(def);
    }
    const int n_init = std::min(budget, std::max(1, budget / 3));
    while (static_cast<int>(pending.size()) < n_init) pending.push_back(random_point());

    std::vector<ParamPoint> evaluated_points;
    double best = std::numeric_limits<double>::infinity();
    int best_idx = -1;
    auto evaluate = [&](const ParamPoint& p) {
        const KernelSpec spec = p.to_spec(opts);
        const double obj = objective(spec);
        evaluated_points.push_back(p);
        result.evaluated.push_back(spec);
        result.objectives.push_back(obj);
        if (obj < best) {
            best = obj;
            best_idx = static_cast<int>(result.evaluated.size()) - 1;
        }
        result.trace.push_back(best);
    };

    for (const ParamPoint& p : pending) {
        if (static_cast<int>(result.evaluated.size()) >= budget) break;
        evaluate(p);
    }

    while (static_cast<int>(result.evaluated.size()) < budget) {
        ParamPoint next;
        bool have_next = false;
        if (opts.acquisition == "ei") {
            // GP surrogate over finished evaluations (finite ones only).
            Mat sx(static_cast<Index>(evaluated_points.size()), 4);
            Vec sy(static_cast<Index>(evaluated_points.size()));
            Index rows = 0;
            double worst_finite = 0;
            for (size_t i = 0; i < evaluated_points.size(); ++i)
                if (std::isfinite(result.objectives[i]))
                    worst_finite = std::max(worst_finite, result.objectives[i]);
            for (size_t i = 0; i < evaluated_points.size(); ++i) {
                sx.row(rows) = evaluated_points[i].coords().transpose();
                const double obj = std::isfinite(result.objectives[i])
                                       ? result.objectives[i]
                                       : 2.0 * worst_finite + 1.0;
                sy[rows] = obj;
                ++rows;
            }
            try {
                KernelSpec sk;
                sk.family = KernelFamily::squared_exponential;
                sk.length_scale = 0.3;
                sk.sigma_f2 = 1.0;
                sk.sigma_n2 = 1e-4;
                const GprModel surrogate =
                    gpr_fit_standardized(sx.topRows(rows), sy.head(rows), sk);

                double best_ei = -1;
                for (int c = 0; c < 256; ++c) {
                    const ParamPoint cand = random_point();
                    Mat q(1, 4);
                    q.row(0) = cand.coords().transpose();
                    const GprPrediction pr = gpr_predict(surrogate, q);
                    const double mu = pr.mean[0];
                    const double sigma = std::sqrt(std::max(pr.variance[0], 1e-18));
                    const double z = (best - mu) / sigma;
                    const double ei = (best - mu) * normal_cdf(z) + sigma * normal_pdf(z);
                    if (ei > best_ei) {
                        best_ei = ei;
                        next = cand;
                        have_next = true;
                    }
                }
            } catch (const Error&) {
                have_next = false;  // surrogate failed; fall back to random
            }
        }
        if (!have_next) next = random_point();
        evaluate(next);
    }

    if (best_idx < 0) throw ConditioningError("tune_gpr: every candidate failed");
    result.best = result.evaluated[static_cast<size_t>(best_idx)];
    result.best_cv_mse = best;
    return result;
}

}  // namespace ppgbp::regress
