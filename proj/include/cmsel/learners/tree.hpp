#pragma once

#include "cmsel/core/rng.hpp"
#include "cmsel/learners/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace cmsel {

struct TreeParams {
    int max_depth = 20;
    /// < 1: fraction of the training sample (rounded up); >= 1: absolute count.
    double min_samples_leaf = 1.0;
    /// Features drawn per node; 0 means all.
    int max_features = 0;
    /// Extra-trees style: one uniform random threshold per candidate feature.
    bool random_thresholds = false;
    /// L2 penalty on leaf values (boosting); plain CART uses 0.
    double leaf_l2 = 0.0;
};

inline Index resolve_min_leaf(double min_samples_leaf, Index n) {
    require(min_samples_leaf > 0.0, "min_samples_leaf must be > 0");
    if (min_samples_leaf < 1.0)
        return std::max<Index>(1, static_cast<Index>(std::ceil(min_samples_leaf * static_cast<double>(n) - 1e-9)));
    return static_cast<Index>(min_samples_leaf);
}

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    Index n_samples = 0;
};

class RegressionTree {
public:
    std::vector<TreeNode> nodes;

    [[nodiscard]] double predict_row(const Matrix& x, Index row) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const auto& nd = nodes[static_cast<std::size_t>(i)];
            i = x(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }

    [[nodiscard]] Vector predict(const Matrix& x) const {
        Vector out(x.rows());
        for (Index r = 0; r < x.rows(); ++r) out[r] = predict_row(x, r);
        return out;
    }

    [[nodiscard]] std::vector<Index> leaf_sizes() const {
        std::vector<Index> out;
        for (const auto& nd : nodes)
            if (nd.feature < 0) out.push_back(nd.n_samples);
        return out;
    }

    [[nodiscard]] int depth() const { return depth_from(0); }

private:
    [[nodiscard]] int depth_from(int i) const {
        const auto& nd = nodes[static_cast<std::size_t>(i)];
        if (nd.feature < 0) return 0;
        return 1 + std::max(depth_from(nd.left), depth_from(nd.right));
    }
};

/// A training sample (row ids, repeats allowed) with, per feature, the sample
/// positions sorted by feature value. Sorting once lets boosting reuse the
/// order across rounds.
struct SortedSample {
    IndexList rows;
    std::vector<std::vector<Index>> order;  // order[f] = positions into rows

    static SortedSample build(const Matrix& x, IndexList rows) {
        SortedSample s;
        s.rows = std::move(rows);
        const auto m = static_cast<Index>(s.rows.size());
        s.order.resize(static_cast<std::size_t>(x.cols()));
        for (Index f = 0; f < x.cols(); ++f) {
            auto& ord = s.order[static_cast<std::size_t>(f)];
            ord.resize(static_cast<std::size_t>(m));
            std::iota(ord.begin(), ord.end(), Index{0});
            std::stable_sort(ord.begin(), ord.end(), [&](Index a, Index b) {
                return x(s.rows[static_cast<std::size_t>(a)], f) < x(s.rows[static_cast<std::size_t>(b)], f);
            });
        }
        return s;
    }

    static SortedSample all_rows(const Matrix& x) {
        IndexList rows(static_cast<std::size_t>(x.rows()));
        std::iota(rows.begin(), rows.end(), Index{0});
        return build(x, std::move(rows));
    }
};

namespace detail {

/// Second-order tree growth: each sample position p carries grad[p] and
/// hess[p]; a node's value is G / (H + lambda) and a split's gain is
/// G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda).
/// With grad = w*y, hess = w, lambda = 0 this is weighted least-squares CART;
/// on {0,1} targets the same criterion is Gini impurity reduction.
class TreeGrower {
public:
    TreeGrower(const Matrix& x, const SortedSample& sample, std::span<const double> grad, std::span<const double> hess,
               const TreeParams& params, Rng* rng)
        : x_(x), sample_(sample), grad_(grad), hess_(hess), p_(params), rng_(rng) {
        const auto m = static_cast<Index>(sample.rows.size());
        min_leaf_ = resolve_min_leaf(params.min_samples_leaf, m);
        work_ = sample.order;
        go_left_.assign(static_cast<std::size_t>(m), 0);
        scratch_.resize(static_cast<std::size_t>(m));
        features_.resize(static_cast<std::size_t>(x.cols()));
        std::iota(features_.begin(), features_.end(), Index{0});
    }

    RegressionTree grow() {
        RegressionTree tree;
        const auto m = static_cast<Index>(sample_.rows.size());
        struct Task {
            int node;
            Index begin, end;
            int depth;
        };
        tree.nodes.emplace_back();
        std::vector<Task> stack{{0, 0, m, 0}};
        while (!stack.empty()) {
            const Task task = stack.back();
            stack.pop_back();
            const auto [g, h] = sums(task.begin, task.end);
            auto& node = tree.nodes[static_cast<std::size_t>(task.node)];
            node.value = leaf_value(g, h);
            node.n_samples = task.end - task.begin;
            if (task.depth >= p_.max_depth || task.end - task.begin < 2 * min_leaf_) continue;
            const auto split = find_split(task.begin, task.end, g, h);
            if (!split) continue;
            const Index mid = partition(task.begin, task.end, split->feature, split->threshold);
            const int left = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& parent = tree.nodes[static_cast<std::size_t>(task.node)];
            parent.feature = static_cast<int>(split->feature);
            parent.threshold = split->threshold;
            parent.left = left;
            parent.right = left + 1;
            // Right pushed first so the left subtree is grown first.
            stack.push_back({left + 1, mid, task.end, task.depth + 1});
            stack.push_back({left, task.begin, mid, task.depth + 1});
        }
        return tree;
    }

private:
    struct Split {
        Index feature;
        double threshold;
        double gain;
    };

    [[nodiscard]] double value_at(Index f, Index pos) const {
        return x_(sample_.rows[static_cast<std::size_t>(pos)], f);
    }

    [[nodiscard]] std::pair<double, double> sums(Index begin, Index end) const {
        double g = 0.0, h = 0.0;
        for (Index i = begin; i < end; ++i) {
            const Index pos = work_[0][static_cast<std::size_t>(i)];
            g += grad_[static_cast<std::size_t>(pos)];
            h += hess_[static_cast<std::size_t>(pos)];
        }
        return {g, h};
    }

    [[nodiscard]] double score(double g, double h) const {
        const double denom = h + p_.leaf_l2;
        return denom > 0.0 ? g * g / denom : 0.0;
    }

    [[nodiscard]] double leaf_value(double g, double h) const {
        const double denom = h + p_.leaf_l2;
        return denom > 0.0 ? g / denom : 0.0;
    }

    std::optional<Split> find_split(Index begin, Index end, double g, double h) {
        const double parent = score(g, h);
        const double eps = 1e-12 * (1.0 + std::abs(parent));
        std::optional<Split> best;
        double best_gain = eps;

        const auto d = static_cast<Index>(features_.size());
        Index n_try = d;
        if (p_.max_features > 0 && p_.max_features < d && rng_ != nullptr) {
            n_try = p_.max_features;
            for (Index i = 0; i < n_try; ++i) {
                std::uniform_int_distribution<Index> pick(i, d - 1);
                std::swap(features_[static_cast<std::size_t>(i)], features_[static_cast<std::size_t>(pick(*rng_))]);
            }
        }
        for (Index k = 0; k < n_try; ++k) {
            const Index f = features_[static_cast<std::size_t>(k)];
            const auto& ord = work_[static_cast<std::size_t>(f)];
            const double lo = value_at(f, ord[static_cast<std::size_t>(begin)]);
            const double hi = value_at(f, ord[static_cast<std::size_t>(end - 1)]);
            if (!(lo < hi)) continue;
            if (p_.random_thresholds) {
                std::uniform_real_distribution<double> u(lo, hi);
                double thr = u(*rng_);
                if (thr >= hi) thr = lo;
                double gl = 0.0, hl = 0.0;
                Index nl = 0;
                for (Index i = begin; i < end; ++i) {
                    const Index pos = ord[static_cast<std::size_t>(i)];
                    if (value_at(f, pos) > thr) break;
                    gl += grad_[static_cast<std::size_t>(pos)];
                    hl += hess_[static_cast<std::size_t>(pos)];
                    ++nl;
                }
                const Index nr = (end - begin) - nl;
                if (nl < min_leaf_ || nr < min_leaf_) continue;
                const double gain = score(gl, hl) + score(g - gl, h - hl) - parent;
                if (gain > best_gain) {
                    best_gain = gain;
                    best = Split{f, thr, gain};
                }
                continue;
            }
            double gl = 0.0, hl = 0.0;
            for (Index i = begin; i < end - 1; ++i) {
                const Index pos = ord[static_cast<std::size_t>(i)];
                gl += grad_[static_cast<std::size_t>(pos)];
                hl += hess_[static_cast<std::size_t>(pos)];
                const Index nl = i - begin + 1;
                const Index nr = (end - begin) - nl;
                if (nl < min_leaf_) continue;
                if (nr < min_leaf_) break;
                const double v = value_at(f, pos);
                const double v_next = value_at(f, ord[static_cast<std::size_t>(i + 1)]);
                if (!(v < v_next)) continue;
                const double gain = score(gl, hl) + score(g - gl, h - hl) - parent;
                if (gain > best_gain) {
                    best_gain = gain;
                    double thr = 0.5 * (v + v_next);
                    if (!(thr < v_next)) thr = v;  // midpoint rounded up to v_next
                    best = Split{f, thr, gain};
                }
            }
        }
        return best;
    }

    /// Stable partition of every feature's segment; returns the boundary.
    Index partition(Index begin, Index end, Index feature, double threshold) {
        Index n_left = 0;
        for (Index i = begin; i < end; ++i) {
            const Index pos = work_[0][static_cast<std::size_t>(i)];
            const bool left = value_at(feature, pos) <= threshold;
            go_left_[static_cast<std::size_t>(pos)] = left ? 1 : 0;
            n_left += left ? 1 : 0;
        }
        for (auto& ord : work_) {
            Index l = begin, r = 0;
            for (Index i = begin; i < end; ++i) {
                const Index pos = ord[static_cast<std::size_t>(i)];
                if (go_left_[static_cast<std::size_t>(pos)])
                    ord[static_cast<std::size_t>(l++)] = pos;
                else
                    scratch_[static_cast<std::size_t>(r++)] = pos;
            }
            std::copy(scratch_.begin(), scratch_.begin() + r, ord.begin() + l);
        }
        return begin + n_left;
    }

    const Matrix& x_;
    const SortedSample& sample_;
    std::span<const double> grad_;
    std::span<const double> hess_;
    TreeParams p_;
    Rng* rng_;
    Index min_leaf_ = 1;
    std::vector<std::vector<Index>> work_;
    std::vector<char> go_left_;
    std::vector<Index> scratch_;
    std::vector<Index> features_;
};

}  // namespace detail

/// Grow one tree on a presorted sample with per-position grad/hess.
inline RegressionTree grow_tree(const Matrix& x, const SortedSample& sample, std::span<const double> grad,
                                std::span<const double> hess, const TreeParams& params, Rng* rng = nullptr) {
    require(params.max_depth >= 1, "tree: max_depth must be >= 1");
    require(!sample.rows.empty(), "tree: empty training sample");
    require(x.cols() >= 1, "tree: need at least one feature");
    if (params.random_thresholds || params.max_features > 0)
        require(rng != nullptr, "tree: randomized splitting needs an rng");
    return detail::TreeGrower(x, sample, grad, hess, params, rng).grow();
}

/// Weighted least-squares CART on `sample` (weights default to 1).
inline RegressionTree grow_cart(const Matrix& x, const Vector& y, const std::optional<Vector>& weights,
                                const SortedSample& sample, const TreeParams& params, Rng* rng = nullptr) {
    std::vector<double> grad(sample.rows.size()), hess(sample.rows.size());
    for (std::size_t p = 0; p < sample.rows.size(); ++p) {
        const Index r = sample.rows[p];
        const double w = weights ? (*weights)[r] : 1.0;
        grad[p] = w * y[r];
        hess[p] = w;
    }
    return grow_tree(x, sample, grad, hess, params, rng);
}

class TreeModel final : public Model {
public:
    explicit TreeModel(RegressionTree tree) : tree_(std::move(tree)) {}
    [[nodiscard]] Vector predict(const Matrix& x) const override { return tree_.predict(x); }
    [[nodiscard]] const RegressionTree& tree() const { return tree_; }

private:
    RegressionTree tree_;
};

/// CART regression (or class-fraction classification on {0,1} targets).
inline std::shared_ptr<TreeModel> fit_tree(const TreeParams& params, const Matrix& x, const Vector& y,
                                           const std::optional<Vector>& weights = std::nullopt, Rng* rng = nullptr) {
    require(x.rows() == y.size(), "tree: rows(x) != len(y)");
    if (weights) require(weights->size() == y.size(), "tree: weights length mismatch");
    const auto sample = SortedSample::all_rows(x);
    return std::make_shared<TreeModel>(grow_cart(x, y, weights, sample, params, rng));
}

}  // namespace cmsel
