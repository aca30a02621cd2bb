#pragma once

#include "ppgbp/eval.hpp"
#include "ppgbp/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ppgbp::regress {

// ---------------------------------------------------------------------------
// Standardization

struct Standardizer {
    Vec mean;                  // per retained column
    Vec stddev;                // sample (n-1), always > 0
    std::vector<int> kept;     // source column indices retained
    std::vector<std::string> dropped_names;

    bool identity() const { return kept.empty() && mean.size() == 0; }
    Mat apply(const Eigen::Ref<const Mat>& x) const;

    static Standardizer fit(const Eigen::Ref<const Mat>& x,
                            const std::vector<std::string>* names = nullptr);
};

// ---------------------------------------------------------------------------
// Gaussian process regression (exact inference)

enum class KernelFamily { squared_exponential, matern52 };

KernelFamily kernel_from_string(const std::string& s);
std::string to_string(KernelFamily k);

struct KernelSpec {
    KernelFamily family = KernelFamily::squared_exponential;
    double sigma_f2 = 1.0;      // signal variance
    double length_scale = 1.0;  // isotropic
    double sigma_n2 = 0.1;      // noise variance
};

double kernel_value(const KernelSpec& k, double squared_distance);

struct GprModel {
    KernelSpec kernel;
    Mat train_x;   // rows in the space the kernel sees
    Vec train_y;
    Vec alpha;     // (K + sigma_n^2 I + jitter I)^-1 y
    Mat chol_l;    // lower Cholesky factor
    double jitter = 0.0;

    // Input/target transforms for pipeline-level models; identity when the
    // core fit is used directly.
    Standardizer std_x;
    double y_mean = 0.0;
    double y_std = 1.0;
};

/// Exact GP fit in the given space (no standardization). Cholesky failures
/// escalate jitter at 1e-10/1e-8/1e-6 of the mean diagonal before giving up.
GprModel gpr_fit(const Eigen::Ref<const Mat>& x, const Eigen::Ref<const Vec>& y,
                 const KernelSpec& kernel);

/// Convenience fit that standardizes inputs and target first; predictions
/// are mapped back automatically.
GprModel gpr_fit_standardized(const Eigen::Ref<const Mat>& x,
                              const Eigen::Ref<const Vec>& y,
                              const KernelSpec& kernel);

struct GprPrediction {
    Vec mean;
    Vec variance;          // predictive (includes sigma_n^2), clamped at 0
    int clamped = 0;       // count of negative variances clamped
};

GprPrediction gpr_predict(const GprModel& model, const Eigen::Ref<const Mat>& x);

/// Negative log marginal likelihood:
/// 0.5 y^T alpha + sum(log diag L) + (N/2) log 2pi.
double gpr_nlml(const GprModel& model);

// ---------------------------------------------------------------------------
// Bagged regression trees

struct TreeNode {
    int feature = -1;       // -1 for a leaf
    double threshold = 0.0; // go left when x <= threshold
    int left = -1;
    int right = -1;
    double value = 0.0;     // leaf mean
};

struct Tree {
    std::vector<TreeNode> nodes;  // node 0 is the root
    double predict(const Eigen::Ref<const Vec>& row) const;
};

struct TreeEnsemble {
    std::vector<Tree> trees;
    int n_features = 0;
    int min_leaf = 0;
    std::uint64_t seed = 0;
};

/// CART-style bagged trees: each tree trains on a bootstrap resample drawn
/// with a per-tree sub-seed; splits minimize squared error over all features
/// and midpoints, leaves hold at least min_leaf rows.
TreeEnsemble forest_fit(const Eigen::Ref<const Mat>& x,
                        const Eigen::Ref<const Vec>& y, int n_trees,
                        int min_leaf, std::uint64_t seed);

Vec forest_predict(const TreeEnsemble& ens, const Eigen::Ref<const Mat>& x);

// ---------------------------------------------------------------------------
// Cross-validation

using Predictor = std::function<Vec(const Eigen::Ref<const Mat>&)>;
using Trainer =
    std::function<Predictor(const Eigen::Ref<const Mat>&, const Eigen::Ref<const Vec>&)>;

struct CvReport {
    struct Fold {
        eval::Metrics metrics;
        int size = 0;
    };
    std::vector<Fold> folds;
    eval::Metrics aggregate;       // pooled out-of-fold predictions
    Vec oof_predictions;           // by original row
    std::vector<int> assignment;   // fold id per row
    std::uint64_t seed = 0;
};

/// Seeded shuffle, contiguous folds; every fold is predicted by a model that
/// never saw it.
CvReport kfold_cv(const Eigen::Ref<const Mat>& x, const Eigen::Ref<const Vec>& y,
                  int k, const Trainer& trainer, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Hyperparameter search (GPR)

struct TuneOptions {
    int cv_folds = 10;
    std::string acquisition = "ei";  // "ei" | "random"
    // Log10 search ranges.
    double log_ell_lo = -2, log_ell_hi = 2;
    double log_sf2_lo = -2, log_sf2_hi = 2;
    double log_sn2_lo = -4, log_sn2_hi = 1;
};

struct TuneResult {
    KernelSpec best;
    double best_cv_mse = 0;
    std::vector<double> trace;  // best-so-far CV-MSE after each evaluation
    std::vector<KernelSpec> evaluated;
    std::vector<double> objectives;
};

/// Minimizes 10-fold CV MSE of the standardized GPR over kernel family and
/// log-uniform hyperparameter ranges: space-filling start (budget/3 points,
/// the default spec always included), then expected-improvement refinement
/// on a GP surrogate (or pure random refinement).
TuneResult tune_gpr(const Eigen::Ref<const Mat>& x,
                    const Eigen::Ref<const Vec>& y, int budget,
                    std::uint64_t seed, const TuneOptions& opts = {});

}  // namespace ppgbp::regress
