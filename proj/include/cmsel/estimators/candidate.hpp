#pragma once

#include "cmsel/estimators/crossfit.hpp"
#include "cmsel/learners/fit.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace cmsel {

enum class Estimator { SL, TL, XL, DR, DML, IPSW };

inline constexpr std::array<Estimator, 6> all_estimators = {Estimator::SL, Estimator::TL,  Estimator::XL,
                                                            Estimator::DR, Estimator::DML, Estimator::IPSW};

inline std::string_view to_string(Estimator e) {
    switch (e) {
        case Estimator::SL: return "SL";
        case Estimator::TL: return "TL";
        case Estimator::XL: return "XL";
        case Estimator::DR: return "DR";
        case Estimator::DML: return "DML";
        case Estimator::IPSW: return "IPSW";
    }
    return "?";
}

inline Estimator parse_estimator(std::string_view s) {
    for (auto e : all_estimators)
        if (to_string(e) == s) return e;
    for (std::string_view excluded : {"causal_forest", "CF", "R-learner", "RL", "TMLE", "TARNet"})
        if (s == excluded) throw ValidationError("estimator out of scope: " + std::string(s));
    throw ValidationError("unknown estimator '" + std::string(s) + "'");
}

/// One point of the search space: an estimator whose internal learners all
/// share one family and one hyperparameter assignment.
struct CandidateSpec {
    Estimator estimator = Estimator::TL;
    LearnerSpec learner;

    /// "estimator/family/hyper_id", the join key of every result file.
    [[nodiscard]] std::string id() const {
        return std::string(to_string(estimator)) + "/" + std::string(to_string(learner.family)) + "/" +
               learner.hyper_id();
    }

    bool operator==(const CandidateSpec&) const = default;
};

using Predictor = std::function<Vector(const Matrix&)>;

struct OutcomeHeads {
    Predictor mu0;
    Predictor mu1;
};

/// Intermediate quantities kept for inspection.
struct FitDiagnostics {
    std::vector<CoverageRecord> coverage;
    std::optional<Vector> pseudo_outcome;  // DR: AIPW pseudo-outcome per training unit
    std::optional<Vector> imputed_effect;  // XL: D1 on treated units, D0 on controls
    std::optional<Vector> dml_coef;        // DML: (theta_0, theta)
    bool ridge_fallback = false;

    [[nodiscard]] bool coverage_exact() const {
        return std::all_of(coverage.begin(), coverage.end(), [](const auto& c) { return exactly_once(c.counts); });
    }
};

class FittedCandidate {
public:
    FittedCandidate(CandidateSpec spec, Index n_features, Predictor cate, std::optional<OutcomeHeads> heads,
                    bool mu_risk_r2_eligible, FitDiagnostics diagnostics = {})
        : spec_(std::move(spec)),
          n_features_(n_features),
          cate_(std::move(cate)),
          heads_(std::move(heads)),
          r2_eligible_(mu_risk_r2_eligible && heads_.has_value()),
          diag_(std::move(diagnostics)) {}

    [[nodiscard]] const CandidateSpec& spec() const { return spec_; }
    [[nodiscard]] std::string id() const { return spec_.id(); }
    [[nodiscard]] Index n_features() const { return n_features_; }
    [[nodiscard]] const FitDiagnostics& diagnostics() const { return diag_; }

    [[nodiscard]] bool has_outcomes() const { return heads_.has_value(); }
    [[nodiscard]] bool mu_risk_r2_eligible() const { return r2_eligible_; }

    [[nodiscard]] Vector predict_cate(const Matrix& x) const {
        check_dims(x);
        if (x.rows() == 0) return Vector(0);
        return cate_(x);
    }

    /// Per-arm outcome prediction; only for candidates with outcome heads.
    [[nodiscard]] Vector predict_outcome(int arm, const Matrix& x) const {
        require(heads_.has_value(), id() + ": no outcome heads");
        check_dims(x);
        if (x.rows() == 0) return Vector(0);
        return arm == 1 ? heads_->mu1(x) : heads_->mu0(x);
    }

private:
    void check_dims(const Matrix& x) const {
        require(x.cols() == n_features_, id() + ": expected " + std::to_string(n_features_) + " features, got " +
                                             std::to_string(x.cols()));
    }

    CandidateSpec spec_;
    Index n_features_;
    Predictor cate_;
    std::optional<OutcomeHeads> heads_;
    bool r2_eligible_;
    FitDiagnostics diag_;
};

}  // namespace cmsel
