#pragma once

#include "cmsel/data/dataset.hpp"
#include "cmsel/metrics/score.hpp"

#include <cmath>

namespace cmsel {

namespace detail {

inline void check_pair(const Vector& a, const Vector& b, const char* who) {
    require(a.size() == b.size(), std::string(who) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                                      std::to_string(b.size()) + ")");
    require(a.size() >= 1, std::string(who) + ": empty input");
}

}  // namespace detail

/// Root mean squared difference between estimated and true effects.
inline double pehe(const Vector& tau_hat, const Vector& tau_true) {
    detail::check_pair(tau_hat, tau_true, "pehe");
    return std::sqrt((tau_hat - tau_true).squaredNorm() / static_cast<double>(tau_hat.size()));
}

/// Absolute difference of mean effects.
inline double e_ate(const Vector& tau_hat, const Vector& tau_true) {
    detail::check_pair(tau_hat, tau_true, "e_ate");
    return std::abs(tau_hat.mean() - tau_true.mean());
}

/// |ATT - mean(tau_hat over treated)| with ATT = mean(yf | treated) - mean(yf | control, experimental).
inline double e_att(const Vector& tau_hat, const Dataset& ds) {
    require(tau_hat.size() == ds.n(), "e_att: length mismatch");
    require(ds.exp_flag.has_value(), "e_att: dataset has no experimental flag");
    double y1 = 0.0, y0 = 0.0, tau1 = 0.0;
    Index n1 = 0, n0e = 0;
    for (Index i = 0; i < ds.n(); ++i) {
        if (ds.t[i] > 0.5) {
            y1 += ds.yf[i];
            tau1 += tau_hat[i];
            ++n1;
        } else if ((*ds.exp_flag)[i] > 0.5) {
            y0 += ds.yf[i];
            ++n0e;
        }
    }
    require(n1 > 0, "e_att: no treated units");
    require(n0e > 0, "e_att: no experimental control units");
    const double att = y1 / static_cast<double>(n1) - y0 / static_cast<double>(n0e);
    return std::abs(att - tau1 / static_cast<double>(n1));
}

/// Policy pi(x) = 1 iff tau_hat(x) > 0. Returns
/// 1 - (E[Y1 | pi=1] P(pi=1) + E[Y0 | pi=0] P(pi=0)). Conditional means use
/// the experimental rows when the dataset flags them; an empty cell adds 0
/// and is named in the note.
inline Score policy_risk(const Vector& tau_hat, const Dataset& ds) {
    require(tau_hat.size() == ds.n() && ds.n() > 0, "policy_risk: length mismatch");
    double sum[2] = {0.0, 0.0};
    Index cell[2] = {0, 0};
    Index treat = 0;
    for (Index i = 0; i < ds.n(); ++i) {
        const int pi = tau_hat[i] > 0.0 ? 1 : 0;
        treat += pi;
        if (ds.exp_flag && (*ds.exp_flag)[i] < 0.5) continue;
        if ((ds.t[i] > 0.5 ? 1 : 0) != pi) continue;
        sum[pi] += ds.yf[i];
        ++cell[pi];
    }
    if (cell[0] == 0 && cell[1] == 0)
        throw ValidationError("policy_risk: policy never agrees with the observed treatment");
    const double p1 = static_cast<double>(treat) / static_cast<double>(ds.n());
    std::string note;
    double value = 0.0;
    if (cell[1] > 0)
        value += sum[1] / static_cast<double>(cell[1]) * p1;
    else if (p1 > 0.0)
        note = "empty cell t=1,pi=1";
    if (cell[0] > 0)
        value += sum[0] / static_cast<double>(cell[0]) * (1.0 - p1);
    else if (p1 < 1.0)
        note += std::string(note.empty() ? "" : "; ") + "empty cell t=0,pi=0";
    return Score::of(1.0 - value, note);
}

/// Test-set metrics by registry name.
inline Score test_metric(std::string_view name, const Vector& tau_hat, const Dataset& test) {
    try {
        if (name == "test_pehe" || name == "test_e_ate") {
            if (!test.has_true_effect()) return Score::unavailable("test set has no true effect");
            const Vector tau = test.true_effect();
            return Score::of(name == "test_pehe" ? pehe(tau_hat, tau) : e_ate(tau_hat, tau));
        }
        if (name == "test_e_att") {
            if (!test.exp_flag) return Score::unavailable("test set has no experimental flag");
            return Score::of(e_att(tau_hat, test));
        }
        if (name == "test_policy_risk") return policy_risk(tau_hat, test);
    } catch (const ValidationError& e) {
        return Score::unavailable(e.what());
    }
    throw ValidationError("unknown test metric '" + std::string(name) + "'");
}

}  // namespace cmsel
