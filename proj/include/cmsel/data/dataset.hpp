#pragma once

#include "cmsel/core/types.hpp"

#include <optional>
#include <string>

namespace cmsel {

enum class OutcomeKind { continuous, binary };

/// Observational sample: covariates, binary treatment and factual outcome,
/// plus whatever ground truth the source provides.
struct Dataset {
    Matrix x;                       // n x d covariates
    Vector t;                       // treatment, values in {0, 1}
    Vector yf;                      // factual outcome
    std::optional<Vector> ycf;      // counterfactual outcome
    std::optional<Vector> mu0;      // noiseless control mean
    std::optional<Vector> mu1;      // noiseless treated mean
    std::optional<Vector> exp_flag; // experimental-sample membership, values in {0, 1}
    OutcomeKind outcome_kind = OutcomeKind::continuous;

    [[nodiscard]] Index n() const { return x.rows(); }
    [[nodiscard]] Index d() const { return x.cols(); }

    [[nodiscard]] Index n_treated() const { return static_cast<Index>(t.sum()); }
    [[nodiscard]] Index n_control() const { return n() - n_treated(); }

    [[nodiscard]] bool has_true_effect() const { return (mu0 && mu1) || ycf.has_value(); }

    /// True individual effect: mu1 - mu0 when present, otherwise y1 - y0
    /// reconstructed from factual/counterfactual outcomes by observed arm.
    [[nodiscard]] Vector true_effect() const {
        if (mu0 && mu1) return *mu1 - *mu0;
        if (ycf) {
            Vector tau(n());
            for (Index i = 0; i < n(); ++i) tau[i] = t[i] > 0.5 ? yf[i] - (*ycf)[i] : (*ycf)[i] - yf[i];
            return tau;
        }
        throw ValidationError("dataset carries no ground-truth effect (needs mu0/mu1 or ycf)");
    }

    [[nodiscard]] IndexList arm_indices(int arm) const {
        IndexList out;
        for (Index i = 0; i < n(); ++i)
            if ((t[i] > 0.5) == (arm == 1)) out.push_back(i);
        return out;
    }

    [[nodiscard]] Dataset subset(std::span<const Index> rows) const {
        Dataset s;
        s.x = take_rows(x, rows);
        s.t = take(t, rows);
        s.yf = take(yf, rows);
        if (ycf) s.ycf = take(*ycf, rows);
        if (mu0) s.mu0 = take(*mu0, rows);
        if (mu1) s.mu1 = take(*mu1, rows);
        if (exp_flag) s.exp_flag = take(*exp_flag, rows);
        s.outcome_kind = outcome_kind;
        return s;
    }

    /// Throws ValidationError naming the first violated invariant.
    void validate() const {
        const Index rows = n();
        auto check_len = [&](const Vector& v, const char* name) {
            require(v.size() == rows, std::string("column '") + name + "' has length " + std::to_string(v.size()) +
                                          ", expected " + std::to_string(rows));
        };
        check_len(t, "t");
        check_len(yf, "yf");
        if (ycf) check_len(*ycf, "ycf");
        if (mu0) check_len(*mu0, "mu0");
        if (mu1) check_len(*mu1, "mu1");
        if (exp_flag) check_len(*exp_flag, "exp_flag");
        require(mu0.has_value() == mu1.has_value(), "mu0 and mu1 must be present together");
        for (Index i = 0; i < rows; ++i)
            require(t[i] == 0.0 || t[i] == 1.0, "treatment not binary at row " + std::to_string(i));
        if (exp_flag)
            for (Index i = 0; i < rows; ++i)
                require((*exp_flag)[i] == 0.0 || (*exp_flag)[i] == 1.0,
                        "experimental flag not binary at row " + std::to_string(i));
        require(n_treated() > 0 && n_control() > 0, "both treatment arms must be nonempty");
    }
};

}  // namespace cmsel
