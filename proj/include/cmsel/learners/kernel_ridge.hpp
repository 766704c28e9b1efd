#pragma once

#include "cmsel/learners/learner.hpp"

#include <cmath>
#include <optional>

namespace cmsel {

/// `linear` is not part of the search space; it exists so kernel ridge can be
/// checked against linear ridge.
enum class KernelKind { rbf, poly, linear };

struct KernelRidgeParams {
    double alpha = 1.0;
    double gamma = 1.0;
    KernelKind kernel = KernelKind::poly;
    int degree = 3;
    double coef0 = 1.0;
    bool standardize = true;
};

inline Matrix kernel_matrix(const KernelRidgeParams& p, const Matrix& a, const Matrix& b) {
    switch (p.kernel) {
        case KernelKind::linear: return a * b.transpose();
        case KernelKind::poly: {
            Matrix k = (p.gamma * (a * b.transpose())).array() + p.coef0;
            return k.array().pow(static_cast<double>(p.degree));
        }
        case KernelKind::rbf: {
            const Vector an = a.rowwise().squaredNorm();
            const Vector bn = b.rowwise().squaredNorm();
            Matrix d2 = (-2.0 * (a * b.transpose())).colwise() + an;
            d2.rowwise() += bn.transpose();
            return (-p.gamma * d2.array().max(0.0)).exp();
        }
    }
    throw ValidationError("unknown kernel");
}

class KernelRidgeModel final : public Model {
public:
    KernelRidgeModel(KernelRidgeParams p, Standardizer st, Matrix support, Vector dual)
        : p_(p), st_(std::move(st)), support_(std::move(support)), dual_(std::move(dual)) {}

    [[nodiscard]] Vector predict(const Matrix& x) const override {
        return kernel_matrix(p_, st_.apply(x), support_) * dual_;
    }

    [[nodiscard]] const Vector& dual_coef() const { return dual_; }

private:
    KernelRidgeParams p_;
    Standardizer st_;
    Matrix support_;
    Vector dual_;
};

/// Dual solve of (K + alpha I) c = y by Cholesky. With sample weights w the
/// system is (W^1/2 K W^1/2 + alpha I) c' = W^1/2 y and c = W^1/2 c'.
inline std::shared_ptr<KernelRidgeModel> fit_kernel_ridge(const KernelRidgeParams& p, const Matrix& x, const Vector& y,
                                                          const std::optional<Vector>& weights = std::nullopt) {
    require(x.rows() == y.size(), "kernel ridge: rows(x) != len(y)");
    require(x.rows() > 0, "kernel ridge: empty training set");
    require(p.alpha > 0.0, "kernel ridge: alpha must be > 0");
    require(p.kernel == KernelKind::linear || p.gamma > 0.0, "kernel ridge: gamma must be > 0");
    require(p.kernel != KernelKind::poly || p.degree >= 1, "kernel ridge: degree must be >= 1");
    const Vector w = weights ? *weights : Vector::Ones(y.size());
    require(w.size() == y.size() && (w.array() >= 0.0).all(), "kernel ridge: bad weights");
    Standardizer st = p.standardize ? Standardizer::fit(x, w) : Standardizer::identity(x.cols());
    Matrix z = st.apply(x);
    Matrix k = kernel_matrix(p, z, z);
    const Vector sw = w.array().sqrt();
    if (weights) k = sw.asDiagonal() * k * sw.asDiagonal();
    k.diagonal().array() += p.alpha;
    Eigen::LLT<Matrix> llt(k);
    if (llt.info() != Eigen::Success) throw NumericError("kernel ridge: Cholesky factorization failed");
    Vector dual = llt.solve(weights ? Vector(sw.cwiseProduct(y)) : y);
    if (weights) dual = sw.cwiseProduct(dual);
    if (!dual.allFinite()) throw NumericError("kernel ridge: non-finite dual coefficients");
    return std::make_shared<KernelRidgeModel>(p, std::move(st), std::move(z), std::move(dual));
}

}  // namespace cmsel
