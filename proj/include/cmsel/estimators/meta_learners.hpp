#pragma once

#include "cmsel/core/rng.hpp"
#include "cmsel/core/stats.hpp"
#include "cmsel/data/dataset.hpp"
#include "cmsel/estimators/candidate.hpp"

#include <optional>

namespace cmsel {

/// Replacements for fitted nuisances. Vectors are indexed by training row
/// and bypass cross-fitting entirely.
struct NuisanceHooks {
    std::optional<double> constant_propensity;
    std::optional<Vector> mu0;  // DR outcome nuisances
    std::optional<Vector> mu1;
    std::optional<Vector> m;  // DML outcome nuisance E[Y|X]
    std::optional<Vector> e;  // DR / DML propensity
};

struct EstimatorOptions {
    FitOptions fit;
    int n_crossfit = 5;
    std::uint64_t seed = 0;
    NuisanceHooks hooks;
};

namespace detail {

inline Predictor learner_predictor(FittedLearner fl) {
    return [fl = std::move(fl)](const Matrix& x) { return fl.predict(x); };
}

inline Predictor propensity_predictor(const LearnerSpec& spec, const Dataset& train, const EstimatorOptions& opt,
                                      std::string_view label) {
    if (opt.hooks.constant_propensity) {
        const double e = std::clamp(*opt.hooks.constant_propensity, kPropensityLo, kPropensityHi);
        return [e](const Matrix& x) { return Vector::Constant(x.rows(), e).eval(); };
    }
    return learner_predictor(
        fit_propensity(spec, train.x, train.t, std::nullopt, opt.fit, derive_seed(opt.seed, label, "e")));
}

inline void require_arm_sizes(const Dataset& train, Index min_units, const char* who) {
    const Index n1 = train.n_treated(), n0 = train.n_control();
    if (std::min(n0, n1) < min_units)
        throw ValidationError(std::string(who) + ": arm too small (" + std::to_string(n0) + " control, " +
                              std::to_string(n1) + " treated; need " + std::to_string(min_units) + " each)");
}

inline FittedLearner fit_arm(const LearnerSpec& spec, const Dataset& train, int arm, const Vector& target,
                             const std::optional<Vector>& weights, const EstimatorOptions& opt, std::string_view label) {
    const auto rows = train.arm_indices(arm);
    std::optional<Vector> w;
    if (weights) w = take(*weights, rows);
    return fit_regressor(spec, take_rows(train.x, rows), take(target, rows), w, opt.fit,
                         derive_seed(opt.seed, label, arm == 1 ? "mu1" : "mu0"));
}

inline FittedCandidate from_heads(const CandidateSpec& cs, Index d, OutcomeHeads heads, bool r2_eligible,
                                  FitDiagnostics diag = {}) {
    Predictor cate = [h = heads](const Matrix& x) { return (h.mu1(x) - h.mu0(x)).eval(); };
    return {cs, d, std::move(cate), std::move(heads), r2_eligible, std::move(diag)};
}

/// Rows of `subset` (indices into the training sample) whose arm is `arm`.
inline IndexList rows_in_arm(const IndexList& subset, const Vector& t, int arm) {
    IndexList out;
    for (Index r : subset)
        if ((t[r] > 0.5) == (arm == 1)) out.push_back(r);
    return out;
}

}  // namespace detail

/// Single regressor on (x, t); mu_t(x) = f(x, t).
inline FittedCandidate fit_s_learner(const LearnerSpec& spec, const Dataset& train, const EstimatorOptions& opt = {}) {
    detail::require_arm_sizes(train, 1, "S-learner");
    auto model = fit_regressor(spec, with_column(train.x, train.t), train.yf, std::nullopt, opt.fit,
                               derive_seed(opt.seed, "SL", "mu"));
    OutcomeHeads heads{[model](const Matrix& x) { return model.predict(with_constant_column(x, 0.0)); },
                       [model](const Matrix& x) { return model.predict(with_constant_column(x, 1.0)); }};
    return detail::from_heads({Estimator::SL, spec}, train.d(), std::move(heads), true);
}

inline FittedCandidate fit_t_learner(const LearnerSpec& spec, const Dataset& train, const EstimatorOptions& opt = {}) {
    detail::require_arm_sizes(train, 2, "T-learner");
    OutcomeHeads heads{detail::learner_predictor(detail::fit_arm(spec, train, 0, train.yf, std::nullopt, opt, "TL")),
                       detail::learner_predictor(detail::fit_arm(spec, train, 1, train.yf, std::nullopt, opt, "TL"))};
    return detail::from_heads({Estimator::TL, spec}, train.d(), std::move(heads), true);
}

/// 1/e for treated and 1/(1-e) for controls.
inline Vector inverse_propensity_weights(const Vector& t, const Vector& e) {
    Vector w(t.size());
    for (Index i = 0; i < t.size(); ++i) w[i] = t[i] > 0.5 ? 1.0 / e[i] : 1.0 / (1.0 - e[i]);
    return w;
}

/// Inverse propensity weights rescaled to mean one within each arm.
inline Vector ipsw_weights(const Vector& t, const Vector& e) {
    Vector w = inverse_propensity_weights(t, e);
    double s[2] = {0.0, 0.0};
    Index c[2] = {0, 0};
    for (Index i = 0; i < t.size(); ++i) {
        const int arm = t[i] > 0.5 ? 1 : 0;
        s[arm] += w[i];
        ++c[arm];
    }
    for (Index i = 0; i < t.size(); ++i) {
        const int arm = t[i] > 0.5 ? 1 : 0;
        w[i] /= s[arm] / static_cast<double>(c[arm]);
    }
    return w;
}

/// T-learner whose arm regressions are weighted by inverse propensity.
/// Weights are rescaled to mean one within each arm, so a constant
/// propensity reproduces the unweighted T-learner exactly.
inline FittedCandidate fit_ipsw_learner(const LearnerSpec& spec, const Dataset& train, const EstimatorOptions& opt = {}) {
    detail::require_arm_sizes(train, 2, "IPSW");
    const Vector e = opt.hooks.e ? opt.hooks.e->cwiseMax(kPropensityLo).cwiseMin(kPropensityHi).eval()
                                 : detail::propensity_predictor(spec, train, opt, "IPSW")(train.x);
    const Vector w = ipsw_weights(train.t, e);
    OutcomeHeads heads{detail::learner_predictor(detail::fit_arm(spec, train, 0, train.yf, w, opt, "IPSW")),
                       detail::learner_predictor(detail::fit_arm(spec, train, 1, train.yf, w, opt, "IPSW"))};
    return detail::from_heads({Estimator::IPSW, spec}, train.d(), std::move(heads), true);
}

/// Imputed effects regressed per arm, blended as e * tau0 + (1 - e) * tau1.
inline FittedCandidate fit_x_learner(const LearnerSpec& spec, const Dataset& train, const EstimatorOptions& opt = {}) {
    detail::require_arm_sizes(train, 2, "X-learner");
    const auto mu0 = detail::fit_arm(spec, train, 0, train.yf, std::nullopt, opt, "XL");
    const auto mu1 = detail::fit_arm(spec, train, 1, train.yf, std::nullopt, opt, "XL");
    const Vector m0 = mu0.predict(train.x), m1 = mu1.predict(train.x);
    Vector d(train.n());
    for (Index i = 0; i < train.n(); ++i) d[i] = train.t[i] > 0.5 ? train.yf[i] - m0[i] : m1[i] - train.yf[i];

    const auto tau0 = detail::fit_arm(spec, train, 0, d, std::nullopt, opt, "XL-tau");
    const auto tau1 = detail::fit_arm(spec, train, 1, d, std::nullopt, opt, "XL-tau");
    const Predictor e = detail::propensity_predictor(spec, train, opt, "XL");
    Predictor cate = [tau0, tau1, e](const Matrix& x) {
        const Vector ex = e(x);
        return (ex.array() * tau0.predict(x).array() + (1.0 - ex.array()) * tau1.predict(x).array()).matrix().eval();
    };
    FitDiagnostics diag;
    diag.imputed_effect = d;
    return {{Estimator::XL, spec}, train.d(), std::move(cate), std::nullopt, false, std::move(diag)};
}

/// AIPW pseudo-outcome from cross-fitted nuisances, regressed on x.
/// Outcome heads average the fold models.
inline FittedCandidate fit_dr_learner(const LearnerSpec& spec, const Dataset& train, const EstimatorOptions& opt = {}) {
    const auto& hk = opt.hooks;
    const auto folds = crossfit_folds(train.t, opt.n_crossfit, derive_seed(opt.seed, "DR", "crossfit"));
    FitDiagnostics diag;
    std::optional<OutcomeHeads> heads;

    Vector mu0, mu1;
    if (hk.mu0 && hk.mu1) {
        mu0 = *hk.mu0;
        mu1 = *hk.mu1;
    } else {
        auto outcome = [&](int arm) {
            return crossfit_predict(train.x, folds, [&](const IndexList& fit_rows, int f) {
                const auto rows = detail::rows_in_arm(fit_rows, train.t, arm);
                return fit_regressor(spec, take_rows(train.x, rows), take(train.yf, rows), std::nullopt, opt.fit,
                                     derive_seed(opt.seed, "DR", arm == 1 ? "mu1" : "mu0", static_cast<std::uint64_t>(f)));
            });
        };
        auto cf0 = outcome(0);
        auto cf1 = outcome(1);
        mu0 = cf0.oof;
        mu1 = cf1.oof;
        diag.coverage.push_back({"mu0", cf0.coverage});
        diag.coverage.push_back({"mu1", cf1.coverage});
        heads = OutcomeHeads{[m = cf0.models](const Matrix& x) { return average_prediction(m, x); },
                             [m = cf1.models](const Matrix& x) { return average_prediction(m, x); }};
    }

    Vector e;
    if (hk.e) {
        e = hk.e->cwiseMax(kPropensityLo).cwiseMin(kPropensityHi);
    } else if (hk.constant_propensity) {
        e = Vector::Constant(train.n(), std::clamp(*hk.constant_propensity, kPropensityLo, kPropensityHi));
    } else {
        auto cf = crossfit_predict(train.x, folds, [&](const IndexList& fit_rows, int f) {
            return fit_propensity(spec, take_rows(train.x, fit_rows), take(train.t, fit_rows), std::nullopt, opt.fit,
                                  derive_seed(opt.seed, "DR", "e", static_cast<std::uint64_t>(f)));
        });
        e = cf.oof;
        diag.coverage.push_back({"e", cf.coverage});
    }

    Vector psi(train.n());
    for (Index i = 0; i < train.n(); ++i) {
        const double y = train.yf[i], t = train.t[i];
        psi[i] = mu1[i] - mu0[i] + t * (y - mu1[i]) / e[i] - (1.0 - t) * (y - mu0[i]) / (1.0 - e[i]);
    }
    auto final_model = fit_regressor(spec, train.x, psi, std::nullopt, opt.fit, derive_seed(opt.seed, "DR", "final"));
    diag.pseudo_outcome = psi;
    return {{Estimator::DR, spec}, train.d(), detail::learner_predictor(std::move(final_model)), std::move(heads), false,
            std::move(diag)};
}

/// Residual-on-residual fit of a CATE linear in x:
/// minimize sum (y~ - t~ (theta_0 + theta^T x))^2.
inline FittedCandidate fit_dml_learner(const LearnerSpec& spec, const Dataset& train, const EstimatorOptions& opt = {}) {
    const auto& hk = opt.hooks;
    const auto folds = crossfit_folds(train.t, opt.n_crossfit, derive_seed(opt.seed, "DML", "crossfit"));
    FitDiagnostics diag;

    Vector m;
    if (hk.m) {
        m = *hk.m;
    } else {
        auto cf = crossfit_predict(train.x, folds, [&](const IndexList& fit_rows, int f) {
            return fit_regressor(spec, take_rows(train.x, fit_rows), take(train.yf, fit_rows), std::nullopt, opt.fit,
                                 derive_seed(opt.seed, "DML", "m", static_cast<std::uint64_t>(f)));
        });
        m = cf.oof;
        diag.coverage.push_back({"m", cf.coverage});
    }
    Vector e;
    if (hk.e) {
        e = hk.e->cwiseMax(kPropensityLo).cwiseMin(kPropensityHi);
    } else if (hk.constant_propensity) {
        e = Vector::Constant(train.n(), std::clamp(*hk.constant_propensity, kPropensityLo, kPropensityHi));
    } else {
        auto cf = crossfit_predict(train.x, folds, [&](const IndexList& fit_rows, int f) {
            return fit_propensity(spec, take_rows(train.x, fit_rows), take(train.t, fit_rows), std::nullopt, opt.fit,
                                  derive_seed(opt.seed, "DML", "e", static_cast<std::uint64_t>(f)));
        });
        e = cf.oof;
        diag.coverage.push_back({"e", cf.coverage});
    }

    const Vector y_res = train.yf - m;
    const Vector t_res = train.t - e;
    const auto sol = weighted_least_squares(linear_design(train.x), y_res.cwiseQuotient(t_res), t_res.cwiseProduct(t_res));
    diag.dml_coef = sol.beta;
    diag.ridge_fallback = sol.ridge_fallback;
    Predictor cate = [beta = sol.beta](const Matrix& x) { return (linear_design(x) * beta).eval(); };
    return {{Estimator::DML, spec}, train.d(), std::move(cate), std::nullopt, false, std::move(diag)};
}

/// Dispatch on the estimator; learner errors are rethrown with the candidate id.
inline FittedCandidate fit_candidate(const CandidateSpec& cs, const Dataset& train, const EstimatorOptions& opt = {}) {
    try {
        switch (cs.estimator) {
            case Estimator::SL: return fit_s_learner(cs.learner, train, opt);
            case Estimator::TL: return fit_t_learner(cs.learner, train, opt);
            case Estimator::XL: return fit_x_learner(cs.learner, train, opt);
            case Estimator::DR: return fit_dr_learner(cs.learner, train, opt);
            case Estimator::DML: return fit_dml_learner(cs.learner, train, opt);
            case Estimator::IPSW: return fit_ipsw_learner(cs.learner, train, opt);
        }
    } catch (const ValidationError& e) {
        throw ValidationError(cs.id() + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(cs.id() + ": " + e.what());
    }
    throw ValidationError("unknown estimator");
}

}  // namespace cmsel
