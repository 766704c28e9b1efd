#pragma once

#include "cmsel/data/split_plan.hpp"
#include "cmsel/learners/learner.hpp"

#include <numeric>
#include <string>
#include <vector>

namespace cmsel {

/// Out-of-fold predictions of one nuisance function.
struct CrossfitResult {
    Vector oof;
    std::vector<int> coverage;  // times each unit was predicted out of fold
    std::vector<FittedLearner> models;
};

/// Named coverage vector, kept on fitted objects so callers can audit it.
struct CoverageRecord {
    std::string nuisance;
    std::vector<int> counts;
};

inline bool exactly_once(const std::vector<int>& coverage) {
    return std::all_of(coverage.begin(), coverage.end(), [](int c) { return c == 1; });
}

/// K folds over all rows of a sample, stratified on t.
inline std::vector<Fold> crossfit_folds(const Vector& t, int k, std::uint64_t seed) {
    require(k >= 2, "cross-fit: need at least 2 folds");
    Index n1 = 0;
    for (Index i = 0; i < t.size(); ++i) n1 += t[i] > 0.5 ? 1 : 0;
    const Index n0 = t.size() - n1;
    if (std::min(n0, n1) < k)
        throw ValidationError("cross-fit: smaller arm has " + std::to_string(std::min(n0, n1)) + " units, fewer than " +
                              std::to_string(k) + " folds");
    IndexList rows(static_cast<std::size_t>(t.size()));
    std::iota(rows.begin(), rows.end(), Index{0});
    Rng rng(seed);
    return stratified_folds(rows, t, k, rng);
}

/// `fit_fold(fit_rows, fold)` trains on the fold's fit rows; the model then
/// predicts that fold's held-out rows.
template <typename FitFold>
CrossfitResult crossfit_predict(const Matrix& x, const std::vector<Fold>& folds, FitFold&& fit_fold) {
    CrossfitResult out;
    out.oof = Vector::Zero(x.rows());
    out.coverage.assign(static_cast<std::size_t>(x.rows()), 0);
    for (std::size_t f = 0; f < folds.size(); ++f) {
        FittedLearner model = fit_fold(folds[f].fit_idx, static_cast<int>(f));
        const Vector pred = model.predict(take_rows(x, folds[f].val_idx));
        for (std::size_t j = 0; j < folds[f].val_idx.size(); ++j) {
            const Index r = folds[f].val_idx[j];
            out.oof[r] = pred[static_cast<Index>(j)];
            ++out.coverage[static_cast<std::size_t>(r)];
        }
        out.models.push_back(std::move(model));
    }
    return out;
}

/// Mean prediction of the fold models, used where a nuisance must be
/// evaluated on new rows.
inline Vector average_prediction(const std::vector<FittedLearner>& models, const Matrix& x) {
    Vector acc = Vector::Zero(x.rows());
    for (const auto& m : models) acc += m.predict(x);
    return acc / static_cast<double>(models.size());
}

}  // namespace cmsel
