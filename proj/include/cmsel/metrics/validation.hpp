#pragma once

#include "cmsel/estimators/meta_learners.hpp"
#include "cmsel/metrics/truth.hpp"

#include <limits>
#include <map>
#include <numeric>

namespace cmsel {

/// Settings for the auxiliary models fitted on validation folds (plugin
/// builders and R-score nuisances).
struct AuxOptions {
    FitOptions fit;
    std::map<Family, GridRestriction> grids;  // per-family grid reductions
    int n_folds = 5;
};

/// 1 - SS_res / SS_tot; empty when y has no variance.
inline std::optional<double> r_squared(const Vector& y, const Vector& y_hat) {
    require(y.size() == y_hat.size() && y.size() > 0, "r_squared: length mismatch");
    const double ss_tot = (y.array() - y.mean()).square().sum();
    if (!(ss_tot > 0.0)) return std::nullopt;
    return 1.0 - (y - y_hat).squaredNorm() / ss_tot;
}

/// Observed-arm prediction mu_t(x) for every row.
inline Vector factual_prediction(const FittedCandidate& fc, const Dataset& ds) {
    const Vector m0 = fc.predict_outcome(0, ds.x), m1 = fc.predict_outcome(1, ds.x);
    Vector out(ds.n());
    for (Index i = 0; i < ds.n(); ++i) out[i] = ds.t[i] > 0.5 ? m1[i] : m0[i];
    return out;
}

// ---------------------------------------------------------------- mu-risk

inline Score mu_risk(const FittedCandidate& fc, const Dataset& val) {
    if (!fc.has_outcomes()) return Score::unavailable("no outcome predictions");
    return Score::of((val.yf - factual_prediction(fc, val)).squaredNorm() / static_cast<double>(val.n()));
}

inline Score mu_risk_r2(const FittedCandidate& fc, const Dataset& val) {
    if (!fc.mu_risk_r2_eligible()) return Score::unavailable("not defined for this estimator");
    const auto r2 = r_squared(val.yf, factual_prediction(fc, val));
    if (!r2) return Score::unavailable("validation outcomes have zero variance");
    return Score::of(*r2);
}

// ---------------------------------------------------------------- plugin

struct PluginVariant {
    Estimator estimator;  // SL or TL
    Family family;        // tree, gbt_light or kernel_ridge

    [[nodiscard]] std::string label() const {
        const char* f = family == Family::tree ? "DT" : family == Family::gbt_light ? "GBT" : "KR";
        return std::string(to_string(estimator)) + "-" + f;
    }
};

inline std::vector<PluginVariant> plugin_variants() {
    std::vector<PluginVariant> out;
    for (auto e : {Estimator::SL, Estimator::TL})
        for (auto f : {Family::tree, Family::gbt_light, Family::kernel_ridge}) out.push_back({e, f});
    return out;
}

inline PluginVariant parse_plugin_variant(std::string_view label) {
    for (const auto& v : plugin_variants())
        if (v.label() == label) return v;
    throw ValidationError("unknown plugin builder '" + std::string(label) + "'");
}

struct PluginTruth {
    std::string builder;
    Vector tau_tilde;
    std::vector<int> coverage;
    LearnerSpec chosen;
    double cv_score = 0.0;
};

namespace detail {

inline void require_arms(const Dataset& ds, Index k, const char* who) {
    if (std::min(ds.n_treated(), ds.n_control()) < k)
        throw ValidationError(std::string(who) + ": arm too small (" + std::to_string(ds.n_control()) + " control, " +
                              std::to_string(ds.n_treated()) + " treated; need " + std::to_string(k) + " each)");
}

/// Grid point with the highest cross-validated score; grid points that fail
/// to fit are skipped. Ties keep the earliest point in grid order.
template <typename ScoreFn>
std::pair<LearnerSpec, double> select_by_cv(const std::vector<LearnerSpec>& grid, ScoreFn&& score, const char* who) {
    std::optional<std::pair<LearnerSpec, double>> best;
    std::string last_error;
    for (const auto& spec : grid) {
        double s;
        try {
            s = score(spec);
        } catch (const ValidationError& e) {
            last_error = e.what();
            continue;
        } catch (const NumericError& e) {
            last_error = e.what();
            continue;
        }
        if (!std::isfinite(s)) continue;
        if (!best || s > best->second) best = std::make_pair(spec, s);
    }
    if (!best) throw NumericError(std::string(who) + ": no grid point could be fitted" +
                                  (last_error.empty() ? "" : " (" + last_error + ")"));
    return *best;
}

inline std::vector<LearnerSpec> aux_grid(Family f, const AuxOptions& opt) {
    auto it = opt.grids.find(f);
    return expand_grid(f, it == opt.grids.end() ? GridRestriction{} : it->second);
}

}  // namespace detail

/// Pseudo-effects on a validation fold: pick the builder family's grid point
/// by cross-validated R^2 of factual predictions, then cross-fit it so each
/// unit's effect comes from a model that never saw it.
inline PluginTruth build_plugin_truth(const PluginVariant& v, const Dataset& val, std::uint64_t seed,
                                      const AuxOptions& opt = {}) {
    require(v.estimator == Estimator::SL || v.estimator == Estimator::TL, "plugin builder must be SL or TL");
    detail::require_arms(val, opt.n_folds, "plugin");
    const auto label = v.label();
    const auto select_folds = crossfit_folds(val.t, opt.n_folds, derive_seed(seed, "plugin", label, "select"));
    auto fit_on = [&](const LearnerSpec& spec, const IndexList& rows, std::uint64_t s) {
        EstimatorOptions eo;
        eo.fit = opt.fit;
        eo.seed = s;
        return fit_candidate({v.estimator, spec}, val.subset(rows), eo);
    };

    auto [chosen, r2] = detail::select_by_cv(
        detail::aux_grid(v.family, opt),
        [&](const LearnerSpec& spec) {
            Vector oof(val.n());
            for (std::size_t f = 0; f < select_folds.size(); ++f) {
                auto fc = fit_on(spec, select_folds[f].fit_idx, derive_seed(seed, "plugin", label, "select", f));
                const Vector pred = factual_prediction(fc, val.subset(select_folds[f].val_idx));
                for (std::size_t j = 0; j < select_folds[f].val_idx.size(); ++j)
                    oof[select_folds[f].val_idx[j]] = pred[static_cast<Index>(j)];
            }
            return r_squared(val.yf, oof).value_or(-std::numeric_limits<double>::infinity());
        },
        "plugin");

    PluginTruth out;
    out.builder = label;
    out.chosen = chosen;
    out.cv_score = r2;
    out.tau_tilde = Vector::Zero(val.n());
    out.coverage.assign(static_cast<std::size_t>(val.n()), 0);
    const auto folds = crossfit_folds(val.t, opt.n_folds, derive_seed(seed, "plugin", label, "crossfit"));
    for (std::size_t f = 0; f < folds.size(); ++f) {
        auto fc = fit_on(chosen, folds[f].fit_idx, derive_seed(seed, "plugin", label, "crossfit", f));
        const Vector tau = fc.predict_cate(take_rows(val.x, folds[f].val_idx));
        for (std::size_t j = 0; j < folds[f].val_idx.size(); ++j) {
            const Index r = folds[f].val_idx[j];
            out.tau_tilde[r] = tau[static_cast<Index>(j)];
            ++out.coverage[static_cast<std::size_t>(r)];
        }
    }
    return out;
}

inline double tau_risk_pehe(const Vector& tau_hat, const Vector& tau_tilde) { return pehe(tau_hat, tau_tilde); }
inline double tau_risk_ate(const Vector& tau_hat, const Vector& tau_tilde) { return e_ate(tau_hat, tau_tilde); }

// ---------------------------------------------------------------- matching

/// Counterfactual outcome per unit: inverse-distance-weighted mean of the k
/// nearest opposite-arm outcomes (Euclidean; covariates standardized by the
/// sample's mean and sd unless disabled). Zero-distance neighbours take over:
/// their mean outcome is used directly.
inline Vector match_counterfactuals(const Dataset& ds, int k, bool standardize = true) {
    require(k >= 1, "matching: k must be >= 1");
    const Matrix z = standardize ? Standardizer::fit(ds.x, Vector::Ones(ds.n())).apply(ds.x) : ds.x;
    const IndexList arms[2] = {ds.arm_indices(0), ds.arm_indices(1)};
    for (int a = 0; a < 2; ++a)
        if (static_cast<Index>(arms[a].size()) < k)
            throw ValidationError("matching: k=" + std::to_string(k) + " exceeds opposite-arm size " +
                                  std::to_string(arms[a].size()));
    Vector out(ds.n());
    std::vector<std::pair<double, Index>> dist;
    for (Index i = 0; i < ds.n(); ++i) {
        const auto& opp = arms[ds.t[i] > 0.5 ? 0 : 1];
        dist.clear();
        for (Index j : opp) dist.emplace_back((z.row(i) - z.row(j)).norm(), j);
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        double exact_sum = 0.0, wsum = 0.0, wy = 0.0;
        int exact = 0;
        for (int q = 0; q < k; ++q) {
            const auto [d, j] = dist[static_cast<std::size_t>(q)];
            if (d == 0.0) {
                exact_sum += ds.yf[j];
                ++exact;
            } else {
                wsum += 1.0 / d;
                wy += ds.yf[j] / d;
            }
        }
        out[i] = exact > 0 ? exact_sum / exact : wy / wsum;
    }
    return out;
}

/// Pseudo-effects from factual outcomes and matched counterfactuals.
inline Vector matching_effects(const Dataset& ds, int k, bool standardize = true) {
    const Vector cf = match_counterfactuals(ds, k, standardize);
    Vector tau(ds.n());
    for (Index i = 0; i < ds.n(); ++i) tau[i] = ds.t[i] > 0.5 ? ds.yf[i] - cf[i] : cf[i] - ds.yf[i];
    return tau;
}

// ---------------------------------------------------------------- R-score

struct NuisancePair {
    Vector m_hat;
    Vector e_hat;
    std::vector<int> m_coverage;
    std::vector<int> e_coverage;
    LearnerSpec m_spec;
    LearnerSpec e_spec;
};

inline std::string rscore_label(Family f) {
    return f == Family::tree ? "dt" : f == Family::gbt_light ? "gbt" : f == Family::kernel_ridge ? "kr" : "?";
}

inline Family parse_rscore_family(std::string_view label) {
    for (auto f : {Family::tree, Family::gbt_light, Family::kernel_ridge})
        if (rscore_label(f) == label) return f;
    throw ValidationError("unknown R-score nuisance family '" + std::string(label) + "'");
}

/// m(X) = E[Y|X] chosen by cross-validated R^2, e(X) = P(T=1|X) chosen by
/// cross-validated Brier score; both then cross-fitted on the fold.
inline NuisancePair fit_rscore_nuisances(Family family, const Dataset& val, std::uint64_t seed, const AuxOptions& opt = {}) {
    detail::require_arms(val, opt.n_folds, "rscore");
    const auto label = rscore_label(family);
    const auto grid = detail::aux_grid(family, opt);
    const auto select_folds = crossfit_folds(val.t, opt.n_folds, derive_seed(seed, "rscore", label, "select"));
    auto oof_of = [&](const std::vector<Fold>& folds, const LearnerSpec& spec, bool classifier, const char* stage) {
        return crossfit_predict(val.x, folds, [&](const IndexList& rows, int f) {
            const auto s = derive_seed(seed, "rscore", label, stage, classifier ? "e" : "m", static_cast<std::uint64_t>(f));
            const Matrix xf = take_rows(val.x, rows);
            return classifier ? fit_propensity(spec, xf, take(val.t, rows), std::nullopt, opt.fit, s)
                              : fit_regressor(spec, xf, take(val.yf, rows), std::nullopt, opt.fit, s);
        });
    };
    const auto m_pick = detail::select_by_cv(
        grid,
        [&](const LearnerSpec& spec) {
            return r_squared(val.yf, oof_of(select_folds, spec, false, "select").oof)
                .value_or(-std::numeric_limits<double>::infinity());
        },
        "rscore m(X)");
    const auto e_pick = detail::select_by_cv(
        grid,
        [&](const LearnerSpec& spec) {
            const Vector e = oof_of(select_folds, spec, true, "select").oof;
            return -(val.t - e).squaredNorm() / static_cast<double>(val.n());
        },
        "rscore e(X)");

    const auto folds = crossfit_folds(val.t, opt.n_folds, derive_seed(seed, "rscore", label, "crossfit"));
    auto m = oof_of(folds, m_pick.first, false, "crossfit");
    auto e = oof_of(folds, e_pick.first, true, "crossfit");
    return {m.oof, e.oof, m.coverage, e.coverage, m_pick.first, e_pick.first};
}

/// R-loss: mean (y~ - t~ tau)^2.
inline double r_loss(const Dataset& val, const NuisancePair& nuis, const Vector& tau) {
    require(tau.size() == val.n() && nuis.m_hat.size() == val.n(), "r_loss: length mismatch");
    const Vector y_res = val.yf - nuis.m_hat;
    const Vector t_res = val.t - nuis.e_hat;
    return (y_res - t_res.cwiseProduct(tau)).squaredNorm() / static_cast<double>(val.n());
}

/// Effects of the linear CATE model minimizing the R-loss.
inline Vector rscore_base_cate(const Dataset& val, const NuisancePair& nuis) {
    const Vector y_res = val.yf - nuis.m_hat;
    const Vector t_res = val.t - nuis.e_hat;
    const Matrix design = linear_design(val.x);
    const auto sol = weighted_least_squares(design, y_res.cwiseQuotient(t_res), t_res.cwiseProduct(t_res));
    return design * sol.beta;
}

inline Score tau_risk_r(const Vector& tau_hat, const Dataset& val, const NuisancePair& nuis) {
    const double base = r_loss(val, nuis, rscore_base_cate(val, nuis));
    // zero up to rounding, relative to the residual outcome scale
    const double scale = (val.yf - nuis.m_hat).squaredNorm() / static_cast<double>(val.n());
    if (!(base > 1e-20 * std::max(scale, 1e-300))) return Score::unavailable("base R-loss is zero");
    return Score::of(1.0 - r_loss(val, nuis, tau_hat) / base);
}

// ---------------------------------------------------------------- per-fold context

/// Candidate-independent state for one validation fold, built once and
/// shared read-only by every candidate scored on it.
struct ValidationContext {
    Dataset val;
    std::vector<std::string> metrics;
    std::map<std::string, PluginTruth> plugins;     // by builder label
    std::map<int, Vector> matched;                  // by k
    std::map<std::string, NuisancePair> rscore;     // by family label
    std::map<std::string, std::string> failures;    // metric-group key -> reason

    [[nodiscard]] bool coverage_exact() const {
        for (const auto& [_, p] : plugins)
            if (!exactly_once(p.coverage)) return false;
        for (const auto& [_, n] : rscore)
            if (!exactly_once(n.m_coverage) || !exactly_once(n.e_coverage)) return false;
        return true;
    }
};

struct ValidationOptions {
    AuxOptions aux;
    bool standardize_matching = true;
};

namespace detail {

/// "tau_plugin_pehe/SL-DT" -> "tau_plugin/SL-DT": metrics sharing the same
/// auxiliary state share a key.
inline std::string aux_key(const std::string& name) {
    const auto slash = name.find('/');
    if (slash == std::string::npos) return name;
    const auto group = name.substr(0, slash);
    return group.substr(0, group.find('_', 4)) + name.substr(slash);
}

}  // namespace detail

inline ValidationContext build_validation_context(Dataset val, std::vector<std::string> metrics, std::uint64_t seed,
                                                  const ValidationOptions& opt = {}) {
    ValidationContext ctx;
    ctx.val = std::move(val);
    ctx.metrics = std::move(metrics);
    for (const auto& name : ctx.metrics) {
        require(metric_info(name).kind == MetricKind::validation, "not a validation metric: " + name);
        const auto key = detail::aux_key(name);
        if (name.find('/') == std::string::npos || ctx.failures.count(key)) continue;
        const auto arg = name.substr(name.find('/') + 1);
        try {
            if (key.rfind("tau_plugin/", 0) == 0) {
                if (!ctx.plugins.count(arg))
                    ctx.plugins.emplace(arg, build_plugin_truth(parse_plugin_variant(arg), ctx.val, seed, opt.aux));
            } else if (key.rfind("tau_match/", 0) == 0) {
                const int k = std::stoi(arg.substr(1));
                if (!ctx.matched.count(k)) ctx.matched.emplace(k, matching_effects(ctx.val, k, opt.standardize_matching));
            } else if (key.rfind("tau_rscore/", 0) == 0) {
                if (!ctx.rscore.count(arg))
                    ctx.rscore.emplace(arg, fit_rscore_nuisances(parse_rscore_family(arg), ctx.val, seed, opt.aux));
            }
        } catch (const ValidationError& e) {
            ctx.failures[key] = e.what();
        } catch (const NumericError& e) {
            ctx.failures[key] = e.what();
        }
    }
    return ctx;
}

/// Every configured validation metric for one fitted candidate, in the
/// context's metric order.
inline std::vector<std::pair<std::string, Score>> score_validation(const FittedCandidate& fc, const ValidationContext& ctx) {
    const Vector tau = fc.predict_cate(ctx.val.x);
    std::vector<std::pair<std::string, Score>> out;
    for (const auto& name : ctx.metrics) {
        const auto slash = name.find('/');
        const std::string group = name.substr(0, slash);
        const std::string arg = slash == std::string::npos ? "" : name.substr(slash + 1);
        auto failed = [&]() -> std::optional<Score> {
            auto it = ctx.failures.find(detail::aux_key(name));
            if (it == ctx.failures.end()) return std::nullopt;
            return Score::unavailable(it->second);
        };
        Score s;
        try {
            if (name == "mu_risk") {
                s = mu_risk(fc, ctx.val);
            } else if (name == "mu_risk_r2") {
                s = mu_risk_r2(fc, ctx.val);
            } else if (name == "policy_risk") {
                s = policy_risk(tau, ctx.val);
            } else if (group.rfind("tau_plugin_", 0) == 0) {
                if (auto f = failed()) {
                    s = *f;
                } else {
                    const auto& p = ctx.plugins.at(arg);
                    s = Score::of(group == "tau_plugin_pehe" ? tau_risk_pehe(tau, p.tau_tilde) : tau_risk_ate(tau, p.tau_tilde));
                }
            } else if (group.rfind("tau_match_", 0) == 0) {
                if (auto f = failed()) {
                    s = *f;
                } else {
                    const auto& m = ctx.matched.at(std::stoi(arg.substr(1)));
                    s = Score::of(group == "tau_match_pehe" ? tau_risk_pehe(tau, m) : tau_risk_ate(tau, m));
                }
            } else if (group == "tau_rscore") {
                if (auto f = failed())
                    s = *f;
                else
                    s = tau_risk_r(tau, ctx.val, ctx.rscore.at(arg));
            } else {
                throw ValidationError("unknown validation metric '" + name + "'");
            }
        } catch (const ValidationError& e) {
            s = Score::unavailable(e.what());
        }
        out.emplace_back(name, std::move(s));
    }
    return out;
}

}  // namespace cmsel
