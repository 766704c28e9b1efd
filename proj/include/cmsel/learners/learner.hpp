#pragma once

#include "cmsel/core/types.hpp"
#include "cmsel/learners/spec.hpp"

#include <algorithm>
#include <memory>
#include <string>

namespace cmsel {

enum class LearnerMode { regressor, prob_classifier };

/// Propensity outputs are clipped into this interval.
inline constexpr double kPropensityLo = 0.01;
inline constexpr double kPropensityHi = 0.99;

/// A trained predictor. Implementations are immutable after fitting.
class Model {
public:
    virtual ~Model() = default;
    [[nodiscard]] virtual Vector predict(const Matrix& x) const = 0;
};

class FittedLearner {
public:
    FittedLearner() = default;
    FittedLearner(Family family, LearnerMode mode, Index n_features, std::shared_ptr<const Model> model)
        : family_(family), mode_(mode), n_features_(n_features), model_(std::move(model)) {}

    [[nodiscard]] Family family() const { return family_; }
    [[nodiscard]] LearnerMode mode() const { return mode_; }
    [[nodiscard]] Index n_features() const { return n_features_; }
    [[nodiscard]] const Model& model() const { return *model_; }

    /// Probability classifiers return values clipped to [0.01, 0.99].
    [[nodiscard]] Vector predict(const Matrix& x) const {
        require(model_ != nullptr, "predict on an unfitted learner");
        require(x.cols() == n_features_, "predict: expected " + std::to_string(n_features_) + " features, got " +
                                             std::to_string(x.cols()));
        if (x.rows() == 0) return Vector(0);
        Vector p = model_->predict(x);
        if (mode_ == LearnerMode::prob_classifier) p = p.cwiseMax(kPropensityLo).cwiseMin(kPropensityHi);
        return p;
    }

    /// Model output before clipping (identical to predict() for regressors).
    [[nodiscard]] Vector predict_raw(const Matrix& x) const {
        require(x.cols() == n_features_, "predict: feature count mismatch");
        return model_->predict(x);
    }

private:
    Family family_ = Family::l2_linear;
    LearnerMode mode_ = LearnerMode::regressor;
    Index n_features_ = 0;
    std::shared_ptr<const Model> model_;
};

/// Weighted mean and standard deviation of each column; zero-variance
/// columns get scale 1 so they standardize to a constant.
struct Standardizer {
    Eigen::RowVectorXd center;
    Eigen::RowVectorXd scale;

    static Standardizer fit(const Matrix& x, const Vector& w, bool with_center = true) {
        Standardizer s;
        const double wsum = w.sum();
        s.center = with_center ? Eigen::RowVectorXd((w.transpose() * x) / wsum) : Eigen::RowVectorXd::Zero(x.cols());
        s.scale.resize(x.cols());
        for (Index j = 0; j < x.cols(); ++j) {
            const double var = (w.array() * (x.col(j).array() - s.center[j]).square()).sum() / wsum;
            s.scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
        }
        return s;
    }

    static Standardizer identity(Index d) {
        return {Eigen::RowVectorXd::Zero(d), Eigen::RowVectorXd::Ones(d)};
    }

    [[nodiscard]] Matrix apply(const Matrix& x) const {
        return (x.rowwise() - center).array().rowwise() / scale.array();
    }
};

}  // namespace cmsel
