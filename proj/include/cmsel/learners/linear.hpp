#pragma once

#include "cmsel/learners/learner.hpp"

#include <cmath>
#include <optional>

namespace cmsel {

struct LinearParams {
    double alpha = 1.0;
    int max_iter = 1000;       // coordinate-descent sweeps (L1 only)
    double tol = 1e-6;         // max coefficient change at convergence (L1 only)
    bool standardize = true;   // weighted train-set mean/sd
    bool fit_intercept = true; // intercept is never penalized
};

class LinearModel final : public Model {
public:
    LinearModel(Vector coef, double intercept, Vector coef_standardized, int iterations)
        : coef_(std::move(coef)),
          intercept_(intercept),
          coef_standardized_(std::move(coef_standardized)),
          iterations_(iterations) {}

    [[nodiscard]] Vector predict(const Matrix& x) const override {
        return (x * coef_).array() + intercept_;
    }

    /// Coefficients on the original feature scale.
    [[nodiscard]] const Vector& coef() const { return coef_; }
    [[nodiscard]] double intercept() const { return intercept_; }
    /// Coefficients on the penalized (standardized) scale.
    [[nodiscard]] const Vector& coef_standardized() const { return coef_standardized_; }
    [[nodiscard]] int iterations() const { return iterations_; }

private:
    Vector coef_;
    double intercept_;
    Vector coef_standardized_;
    int iterations_;
};

namespace detail {

struct CenteredProblem {
    Standardizer st;
    Matrix z;
    Vector y_centered;
    double y_center = 0.0;
    Vector w;
};

inline CenteredProblem center_problem(const LinearParams& p, const Matrix& x, const Vector& y, const std::optional<Vector>& weights) {
    require(x.rows() == y.size(), "linear fit: rows(x) != len(y)");
    require(x.rows() > 0, "linear fit: empty training set");
    require(p.alpha > 0.0, "linear fit: alpha must be > 0 (alpha = 0 is outside the grid)");
    CenteredProblem cp;
    cp.w = weights ? *weights : Vector::Ones(y.size());
    require(cp.w.size() == y.size(), "linear fit: weights length mismatch");
    require((cp.w.array() >= 0.0).all() && cp.w.sum() > 0.0, "linear fit: weights must be nonnegative with positive sum");
    if (p.standardize)
        cp.st = Standardizer::fit(x, cp.w, p.fit_intercept);
    else
        cp.st = Standardizer::identity(x.cols());
    if (p.fit_intercept && !p.standardize) cp.st.center = (cp.w.transpose() * x) / cp.w.sum();
    cp.z = cp.st.apply(x);
    cp.y_center = p.fit_intercept ? cp.w.dot(y) / cp.w.sum() : 0.0;
    cp.y_centered = y.array() - cp.y_center;
    return cp;
}

inline std::shared_ptr<LinearModel> unstandardize(const CenteredProblem& cp, const Vector& beta_std, int iterations) {
    Vector coef = beta_std.array() / cp.st.scale.transpose().array();
    const double intercept = cp.y_center - cp.st.center.dot(coef);
    return std::make_shared<LinearModel>(coef, intercept, beta_std, iterations);
}

}  // namespace detail

/// Ridge: minimizes sum_i w_i (y_i - b - z_i beta)^2 + alpha ||beta||^2 in closed form.
inline std::shared_ptr<LinearModel> fit_ridge(const LinearParams& p, const Matrix& x, const Vector& y,
                                              const std::optional<Vector>& weights = std::nullopt) {
    auto cp = detail::center_problem(p, x, y, weights);
    const Matrix zw = cp.z.array().colwise() * cp.w.array();
    Matrix gram = cp.z.transpose() * zw;
    gram.diagonal().array() += p.alpha;
    const Vector rhs = zw.transpose() * cp.y_centered;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) throw NumericError("ridge: normal equations not positive definite");
    return detail::unstandardize(cp, llt.solve(rhs), 1);
}

inline double soft_threshold(double v, double lambda) {
    if (v > lambda) return v - lambda;
    if (v < -lambda) return v + lambda;
    return 0.0;
}

/// Lasso by cyclic coordinate descent on
/// (1 / (2 sum w)) sum_i w_i (y_i - b - z_i beta)^2 + alpha ||beta||_1.
inline std::shared_ptr<LinearModel> fit_lasso(const LinearParams& p, const Matrix& x, const Vector& y,
                                              const std::optional<Vector>& weights = std::nullopt) {
    auto cp = detail::center_problem(p, x, y, weights);
    const Vector wn = cp.w / cp.w.sum();
    const Index d = cp.z.cols();
    Vector beta = Vector::Zero(d);
    Vector resid = cp.y_centered;
    Vector col_norm(d);
    for (Index j = 0; j < d; ++j) col_norm[j] = (wn.array() * cp.z.col(j).array().square()).sum();
    int sweeps = 0;
    for (; sweeps < p.max_iter; ++sweeps) {
        double max_change = 0.0;
        for (Index j = 0; j < d; ++j) {
            if (col_norm[j] <= 0.0) continue;
            const double old = beta[j];
            const double rho = (wn.array() * cp.z.col(j).array() * resid.array()).sum() + col_norm[j] * old;
            const double updated = soft_threshold(rho, p.alpha) / col_norm[j];
            if (updated != old) {
                resid -= (updated - old) * cp.z.col(j);
                beta[j] = updated;
                max_change = std::max(max_change, std::abs(updated - old));
            }
        }
        if (max_change < p.tol) {
            ++sweeps;
            break;
        }
    }
    return detail::unstandardize(cp, beta, sweeps);
}

}  // namespace cmsel
