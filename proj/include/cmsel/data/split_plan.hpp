#pragma once

#include "cmsel/core/rng.hpp"
#include "cmsel/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace cmsel {

struct Fold {
    IndexList fit_idx;
    IndexList val_idx;

    bool operator==(const Fold&) const = default;
};

struct IterationSplit {
    Index n_rows = 0;
    IndexList train_idx;
    IndexList test_idx;
    std::vector<Fold> folds;

    bool operator==(const IterationSplit&) const = default;
};

/// Stage-1 artifact: every train/test and fit/validation partition, fixed
/// before any model is trained.
struct SplitPlan {
    std::vector<IterationSplit> iterations;
    std::uint64_t seed = 0;
    int n_folds = 0;

    bool operator==(const SplitPlan&) const = default;
};

/// Shuffle each arm independently and deal the units round-robin into k
/// groups, continuing the deal across arms so group sizes differ by at most one.
inline std::vector<IndexList> stratified_deal(std::span<const Index> rows, const Vector& t, int k, Rng& rng) {
    IndexList treated, control;
    for (Index r : rows) (t[r] > 0.5 ? treated : control).push_back(r);
    std::shuffle(treated.begin(), treated.end(), rng);
    std::shuffle(control.begin(), control.end(), rng);
    std::vector<IndexList> groups(static_cast<std::size_t>(k));
    std::size_t slot = 0;
    for (const auto* arm : {&treated, &control})
        for (Index r : *arm) {
            groups[slot].push_back(r);
            slot = (slot + 1) % groups.size();
        }
    for (auto& g : groups) std::sort(g.begin(), g.end());
    return groups;
}

/// Stratified k-fold partition of `rows`; each fold's fit set is the complement.
inline std::vector<Fold> stratified_folds(std::span<const Index> rows, const Vector& t, int k, Rng& rng) {
    auto groups = stratified_deal(rows, t, k, rng);
    std::vector<Fold> folds;
    for (int f = 0; f < k; ++f) {
        Fold fold;
        fold.val_idx = groups[static_cast<std::size_t>(f)];
        for (int g = 0; g < k; ++g)
            if (g != f) fold.fit_idx.insert(fold.fit_idx.end(), groups[static_cast<std::size_t>(g)].begin(), groups[static_cast<std::size_t>(g)].end());
        std::sort(fold.fit_idx.begin(), fold.fit_idx.end());
        folds.push_back(std::move(fold));
    }
    return folds;
}

inline IterationSplit build_iteration_split(const Vector& t, double test_fraction, int n_folds, Rng& rng) {
    const Index n = t.size();
    IndexList treated, control;
    for (Index i = 0; i < n; ++i) (t[i] > 0.5 ? treated : control).push_back(i);
    std::shuffle(treated.begin(), treated.end(), rng);
    std::shuffle(control.begin(), control.end(), rng);

    IterationSplit it;
    it.n_rows = n;
    for (const auto* arm : {&treated, &control}) {
        const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(arm->size())));
        it.test_idx.insert(it.test_idx.end(), arm->begin(), arm->begin() + static_cast<std::ptrdiff_t>(n_test));
        it.train_idx.insert(it.train_idx.end(), arm->begin() + static_cast<std::ptrdiff_t>(n_test), arm->end());
        const auto n_train_arm = arm->size() - n_test;
        if (n_train_arm < static_cast<std::size_t>(n_folds))
            throw ValidationError("arm too small to stratify: " + std::to_string(n_train_arm) + " " +
                                  (arm == &treated ? "treated" : "control") + " training units for " +
                                  std::to_string(n_folds) + " folds");
    }
    std::sort(it.train_idx.begin(), it.train_idx.end());
    std::sort(it.test_idx.begin(), it.test_idx.end());
    it.folds = stratified_folds(it.train_idx, t, n_folds, rng);
    return it;
}

/// One treatment vector per iteration (a single file reshuffled, or one file
/// per realisation).
inline SplitPlan build_split_plan(const std::vector<Vector>& treatment_per_iteration, double test_fraction, int n_folds,
                                  std::uint64_t seed) {
    require(!treatment_per_iteration.empty(), "build_split_plan: need at least one iteration");
    require(test_fraction > 0.0 && test_fraction < 1.0, "build_split_plan: test_fraction must lie in (0, 1)");
    require(n_folds >= 2, "build_split_plan: n_folds must be >= 2");
    SplitPlan plan;
    plan.seed = seed;
    plan.n_folds = n_folds;
    for (std::size_t i = 0; i < treatment_per_iteration.size(); ++i) {
        Rng rng(derive_seed(seed, "iteration", i));
        plan.iterations.push_back(build_iteration_split(treatment_per_iteration[i], test_fraction, n_folds, rng));
    }
    return plan;
}

inline SplitPlan build_split_plan(const Dataset& ds, int n_iterations, double test_fraction, int n_folds,
                                  std::uint64_t seed) {
    require(n_iterations >= 1, "build_split_plan: n_iterations must be >= 1");
    return build_split_plan(std::vector<Vector>(static_cast<std::size_t>(n_iterations), ds.t), test_fraction, n_folds,
                            seed);
}

namespace detail {

inline void write_indices(std::ostringstream& out, const char* tag, const IndexList& idx) {
    out << tag;
    for (Index i : idx) out << ' ' << i;
    out << '\n';
}

}  // namespace detail

/// Text form, sections in fixed order: header, then per iteration the train
/// and test lists followed by each fold's fit and val lists.
inline std::string serialize(const SplitPlan& plan) {
    std::ostringstream out;
    out << "cmsel-split-plan 1\n";
    out << "seed " << plan.seed << '\n';
    out << "n_folds " << plan.n_folds << '\n';
    out << "n_iterations " << plan.iterations.size() << '\n';
    for (std::size_t i = 0; i < plan.iterations.size(); ++i) {
        const auto& it = plan.iterations[i];
        out << "iteration " << i << " n_rows " << it.n_rows << '\n';
        detail::write_indices(out, "train", it.train_idx);
        detail::write_indices(out, "test", it.test_idx);
        for (std::size_t f = 0; f < it.folds.size(); ++f) {
            out << "fold " << f << '\n';
            detail::write_indices(out, "fit", it.folds[f].fit_idx);
            detail::write_indices(out, "val", it.folds[f].val_idx);
        }
    }
    return out.str();
}

/// Checks every partition invariant; throws ValidationError on the first violation.
inline void validate_plan(const SplitPlan& plan) {
    require(plan.n_folds >= 2, "plan: n_folds must be >= 2");
    for (std::size_t i = 0; i < plan.iterations.size(); ++i) {
        const auto& it = plan.iterations[i];
        const std::string where = "plan iteration " + std::to_string(i) + ": ";
        std::vector<int> seen(static_cast<std::size_t>(it.n_rows), 0);
        for (const auto* list : {&it.train_idx, &it.test_idx})
            for (Index r : *list) {
                require(r >= 0 && r < it.n_rows, where + "index out of range");
                ++seen[static_cast<std::size_t>(r)];
            }
        require(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }),
                where + "train and test must partition all rows");
        require(static_cast<int>(it.folds.size()) == plan.n_folds, where + "fold count mismatch");
        std::vector<int> val_seen(static_cast<std::size_t>(it.n_rows), 0);
        for (std::size_t f = 0; f < it.folds.size(); ++f) {
            IndexList merged = it.folds[f].fit_idx;
            merged.insert(merged.end(), it.folds[f].val_idx.begin(), it.folds[f].val_idx.end());
            std::sort(merged.begin(), merged.end());
            require(merged == it.train_idx, where + "fold " + std::to_string(f) + " fit/val must partition train");
            for (Index r : it.folds[f].val_idx) ++val_seen[static_cast<std::size_t>(r)];
        }
        for (Index r : it.train_idx)
            require(val_seen[static_cast<std::size_t>(r)] == 1, where + "validation sets must partition train");
    }
}

inline SplitPlan parse_split_plan(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto next = [&](const std::string& expect_tag) -> std::istringstream {
        do {
            if (!std::getline(in, line)) throw ValidationError("plan: unexpected end of file, expected '" + expect_tag + "'");
            ++lineno;
        } while (line.empty());
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag != expect_tag)
            throw ValidationError("plan line " + std::to_string(lineno) + ": expected '" + expect_tag + "', got '" + tag + "'");
        return ls;
    };
    auto read_list = [&](const std::string& tag) {
        auto ls = next(tag);
        IndexList out;
        long long v;
        while (ls >> v) out.push_back(static_cast<Index>(v));
        if (!ls.eof()) throw ValidationError("plan line " + std::to_string(lineno) + ": malformed index list");
        return out;
    };

    SplitPlan plan;
    {
        auto ls = next("cmsel-split-plan");
        int version = 0;
        ls >> version;
        if (version != 1) throw ValidationError("plan: unsupported version " + std::to_string(version));
    }
    next("seed") >> plan.seed;
    next("n_folds") >> plan.n_folds;
    std::size_t n_iter = 0;
    next("n_iterations") >> n_iter;
    for (std::size_t i = 0; i < n_iter; ++i) {
        IterationSplit it;
        auto ls = next("iteration");
        std::size_t idx = 0;
        std::string key;
        ls >> idx >> key >> it.n_rows;
        if (idx != i || key != "n_rows") throw ValidationError("plan line " + std::to_string(lineno) + ": bad iteration header");
        it.train_idx = read_list("train");
        it.test_idx = read_list("test");
        for (int f = 0; f < plan.n_folds; ++f) {
            int fidx = -1;
            next("fold") >> fidx;
            if (fidx != f) throw ValidationError("plan line " + std::to_string(lineno) + ": bad fold header");
            Fold fold;
            fold.fit_idx = read_list("fit");
            fold.val_idx = read_list("val");
            it.folds.push_back(std::move(fold));
        }
        plan.iterations.push_back(std::move(it));
    }
    validate_plan(plan);
    return plan;
}

}  // namespace cmsel
