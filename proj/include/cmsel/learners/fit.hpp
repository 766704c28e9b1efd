#pragma once

#include "cmsel/learners/ensembles.hpp"
#include "cmsel/learners/kernel_ridge.hpp"
#include "cmsel/learners/linear.hpp"
#include "cmsel/learners/tree.hpp"

#include <optional>

namespace cmsel {

/// Settings outside the hyperparameter grid.
struct FitOptions {
    int n_estimators = 1000;     // ensemble size for forests and boosting
    double learning_rate = 0.1;  // boosting shrinkage
};

inline LinearParams linear_params(const LearnerSpec& s) {
    LinearParams p;
    p.alpha = s.num("alpha");
    p.max_iter = static_cast<int>(s.num("max_iter"));
    return p;
}

inline KernelRidgeParams kernel_ridge_params(const LearnerSpec& s) {
    KernelRidgeParams p;
    p.alpha = s.num("alpha");
    p.gamma = s.num("gamma");
    const auto k = s.str("kernel");
    if (k == "rbf")
        p.kernel = KernelKind::rbf;
    else if (k == "poly")
        p.kernel = KernelKind::poly;
    else
        throw ValidationError("kernel_ridge: unknown kernel '" + k + "'");
    p.degree = static_cast<int>(s.num("degree"));
    return p;
}

inline TreeParams tree_params(const LearnerSpec& s) {
    TreeParams p;
    p.max_depth = static_cast<int>(s.num("max_depth"));
    p.min_samples_leaf = s.num("min_samples_leaf");
    return p;
}

inline GbtParams gbt_params(const LearnerSpec& s, const FitOptions& opt) {
    GbtParams p;
    p.n_estimators = opt.n_estimators;
    p.learning_rate = opt.learning_rate;
    if (s.family == Family::gbt_light) {
        p.max_depth = static_cast<int>(s.num("max_depth"));
        p.lambda = s.num("reg_lambda");
        p.min_samples_leaf = 20.0;  // LightGBM min_data_in_leaf default
    } else {
        p.max_depth = static_cast<int>(s.num("depth"));
        p.lambda = s.num("l2_leaf_reg");
    }
    return p;
}

namespace detail {

inline std::shared_ptr<const Model> fit_model(const LearnerSpec& spec, const Matrix& x, const Vector& y,
                                              const std::optional<Vector>& weights, const FitOptions& opt,
                                              std::uint64_t seed, LearnerMode mode) {
    switch (spec.family) {
        case Family::l1_linear: return fit_lasso(linear_params(spec), x, y, weights);
        case Family::l2_linear: return fit_ridge(linear_params(spec), x, y, weights);
        case Family::kernel_ridge: return fit_kernel_ridge(kernel_ridge_params(spec), x, y, weights);
        case Family::tree: return fit_tree(tree_params(spec), x, y, weights);
        case Family::random_forest:
        case Family::extra_trees: {
            ForestParams fp;
            fp.tree = tree_params(spec);
            fp.n_estimators = opt.n_estimators;
            fp.variant = spec.family == Family::random_forest ? ForestVariant::random_forest : ForestVariant::extra_trees;
            return fit_forest(fp, x, y, weights, seed);
        }
        case Family::gbt_light:
        case Family::gbt_cat: {
            auto gp = gbt_params(spec, opt);
            if (mode == LearnerMode::prob_classifier) gp.loss = GbtLoss::logistic;
            return fit_gbt(gp, x, y, weights);
        }
    }
    throw ValidationError("unknown learner family");
}

}  // namespace detail

/// Fit a regressor of the spec's family. `seed` drives the randomized families only.
inline FittedLearner fit_regressor(const LearnerSpec& spec, const Matrix& x, const Vector& y,
                                   const std::optional<Vector>& weights = std::nullopt, const FitOptions& opt = {},
                                   std::uint64_t seed = 0) {
    require(x.rows() == y.size(), "fit: rows(x) != len(y)");
    require(x.rows() > 0, "fit: empty training set");
    return {spec.family, LearnerMode::regressor, x.cols(),
            detail::fit_model(spec, x, y, weights, opt, seed, LearnerMode::regressor)};
}

/// Probability classifier for P(T=1 | X). Trees and forests use leaf class
/// fractions, boosting uses the logistic loss, linear and kernel learners
/// use squared loss on the {0,1} targets. Outputs are clipped to [0.01, 0.99].
inline FittedLearner fit_propensity(const LearnerSpec& spec, const Matrix& x, const Vector& t,
                                    const std::optional<Vector>& weights = std::nullopt, const FitOptions& opt = {},
                                    std::uint64_t seed = 0) {
    require(x.rows() == t.size(), "fit_propensity: rows(x) != len(t)");
    bool has0 = false, has1 = false;
    for (Index i = 0; i < t.size(); ++i) {
        require(t[i] == 0.0 || t[i] == 1.0, "fit_propensity: treatment not binary at row " + std::to_string(i));
        (t[i] > 0.5 ? has1 : has0) = true;
    }
    if (!(has0 && has1)) throw ValidationError("fit_propensity: one-class treatment");
    return {spec.family, LearnerMode::prob_classifier, x.cols(),
            detail::fit_model(spec, x, t, weights, opt, seed, LearnerMode::prob_classifier)};
}

}  // namespace cmsel
