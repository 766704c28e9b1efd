#pragma once

#include "cmsel/core/rng.hpp"
#include "cmsel/learners/tree.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <vector>

namespace cmsel {

enum class ForestVariant { random_forest, extra_trees };

struct ForestParams {
    TreeParams tree;
    int n_estimators = 1000;
    ForestVariant variant = ForestVariant::random_forest;
    /// Defaults: random forest bootstraps, extra trees do not.
    std::optional<bool> bootstrap;
    /// Defaults: floor(sqrt(d)) for random forest, all features for extra trees.
    std::optional<int> max_features;
};

class ForestModel final : public Model {
public:
    explicit ForestModel(std::vector<RegressionTree> trees) : trees_(std::move(trees)) {}

    [[nodiscard]] Vector predict(const Matrix& x) const override {
        Vector acc = Vector::Zero(x.rows());
        for (const auto& t : trees_) acc += t.predict(x);
        return acc / static_cast<double>(trees_.size());
    }

    [[nodiscard]] std::size_t size() const { return trees_.size(); }

private:
    std::vector<RegressionTree> trees_;
};

/// Each tree draws from its own seed derived from (seed, tree index), so the
/// ensemble is identical however the trees are scheduled.
inline std::shared_ptr<ForestModel> fit_forest(const ForestParams& params, const Matrix& x, const Vector& y,
                                               const std::optional<Vector>& weights, std::uint64_t seed) {
    require(params.n_estimators >= 1, "forest: n_estimators must be >= 1");
    require(x.rows() == y.size() && x.rows() > 0, "forest: bad training data");
    const bool rf = params.variant == ForestVariant::random_forest;
    const bool bootstrap = params.bootstrap.value_or(rf);
    const auto d = static_cast<int>(x.cols());
    const int max_features =
        params.max_features.value_or(rf ? std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(d))))) : d);

    TreeParams tp = params.tree;
    tp.max_features = max_features >= d ? 0 : max_features;
    tp.random_thresholds = !rf;

    const std::optional<SortedSample> full =
        bootstrap ? std::nullopt : std::optional<SortedSample>(SortedSample::all_rows(x));
    std::vector<RegressionTree> trees;
    trees.reserve(static_cast<std::size_t>(params.n_estimators));
    for (int k = 0; k < params.n_estimators; ++k) {
        Rng rng(derive_seed(seed, "tree", static_cast<std::uint64_t>(k)));
        if (bootstrap) {
            IndexList rows(static_cast<std::size_t>(x.rows()));
            std::uniform_int_distribution<Index> pick(0, x.rows() - 1);
            for (auto& r : rows) r = pick(rng);
            std::sort(rows.begin(), rows.end());
            const auto sample = SortedSample::build(x, std::move(rows));
            trees.push_back(grow_cart(x, y, weights, sample, tp, &rng));
        } else {
            trees.push_back(grow_cart(x, y, weights, *full, tp, &rng));
        }
    }
    return std::make_shared<ForestModel>(std::move(trees));
}

enum class GbtLoss { squared, logistic };

struct GbtParams {
    int n_estimators = 1000;
    double learning_rate = 0.1;
    int max_depth = 10;
    double lambda = 0.1;  // L2 penalty on leaf values
    double min_samples_leaf = 1.0;
    GbtLoss loss = GbtLoss::squared;
};

class GbtModel final : public Model {
public:
    GbtModel(double init, double learning_rate, GbtLoss loss, std::vector<RegressionTree> trees, std::vector<double> train_loss)
        : init_(init), lr_(learning_rate), loss_(loss), trees_(std::move(trees)), train_loss_(std::move(train_loss)) {}

    [[nodiscard]] Vector raw_score(const Matrix& x) const {
        Vector f = Vector::Constant(x.rows(), init_);
        for (const auto& t : trees_) f += lr_ * t.predict(x);
        return f;
    }

    /// Regression value, or probability for the logistic loss.
    [[nodiscard]] Vector predict(const Matrix& x) const override {
        Vector f = raw_score(x);
        if (loss_ == GbtLoss::logistic) f = f.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        return f;
    }

    /// Weighted training loss after the initial constant (index 0) and after each round.
    [[nodiscard]] const std::vector<double>& train_loss() const { return train_loss_; }

private:
    double init_;
    double lr_;
    GbtLoss loss_;
    std::vector<RegressionTree> trees_;
    std::vector<double> train_loss_;
};

/// Stagewise boosting of depth-limited trees. Squared loss: each tree fits the
/// residuals with leaf value sum(w r) / (sum(w) + lambda). Logistic loss: one
/// Newton step per leaf, sum(w (y - p)) / (sum(w p (1 - p)) + lambda).
inline std::shared_ptr<GbtModel> fit_gbt(const GbtParams& params, const Matrix& x, const Vector& y,
                                         const std::optional<Vector>& weights = std::nullopt) {
    require(params.n_estimators >= 1, "gbt: n_estimators must be >= 1");
    require(params.learning_rate > 0.0, "gbt: learning_rate must be > 0");
    require(params.lambda >= 0.0, "gbt: lambda must be >= 0");
    require(x.rows() == y.size() && x.rows() > 0, "gbt: bad training data");
    const Index n = x.rows();
    const Vector w = weights ? *weights : Vector::Ones(n);
    require(w.size() == n && (w.array() >= 0.0).all() && w.sum() > 0.0, "gbt: bad weights");
    const double wsum = w.sum();

    double init = w.dot(y) / wsum;
    if (params.loss == GbtLoss::logistic) {
        const double p = std::clamp(init, 1e-6, 1.0 - 1e-6);
        init = std::log(p / (1.0 - p));
    }

    TreeParams tp;
    tp.max_depth = params.max_depth;
    tp.min_samples_leaf = params.min_samples_leaf;
    tp.leaf_l2 = params.lambda;

    const auto sample = SortedSample::all_rows(x);
    Vector f = Vector::Constant(n, init);
    std::vector<double> grad(static_cast<std::size_t>(n)), hess(static_cast<std::size_t>(n));
    auto loss_of = [&](const Vector& score) {
        if (params.loss == GbtLoss::squared) return (w.array() * (y - score).array().square()).sum() / wsum;
        double l = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double s = score[i];
            // log(1 + e^s) - y s, computed stably
            const double softplus = s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
            l += w[i] * (softplus - y[i] * s);
        }
        return l / wsum;
    };
    std::vector<double> history{loss_of(f)};
    std::vector<RegressionTree> trees;
    trees.reserve(static_cast<std::size_t>(params.n_estimators));
    for (int round = 0; round < params.n_estimators; ++round) {
        for (Index i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (params.loss == GbtLoss::squared) {
                grad[k] = w[i] * (y[i] - f[i]);
                hess[k] = w[i];
            } else {
                const double p = 1.0 / (1.0 + std::exp(-f[i]));
                grad[k] = w[i] * (y[i] - p);
                hess[k] = w[i] * p * (1.0 - p);
            }
        }
        auto tree = grow_tree(x, sample, grad, hess, tp);
        f += params.learning_rate * tree.predict(x);
        history.push_back(loss_of(f));
        trees.push_back(std::move(tree));
    }
    return std::make_shared<GbtModel>(init, params.learning_rate, params.loss, std::move(trees), std::move(history));
}

}  // namespace cmsel
