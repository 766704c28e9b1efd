#pragma once

#include "cmsel/core/rng.hpp"
#include "cmsel/data/dataset.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace cmsel {

/// Closed interval of x values; empty when lo > hi.
struct Band {
    double lo = 1.0;
    double hi = 0.0;

    [[nodiscard]] bool empty() const { return lo > hi; }
    [[nodiscard]] bool contains(double v) const { return !empty() && v >= lo && v <= hi; }
    static Band none() { return {}; }
};

/// Constants of the sinusoidal demonstration process. Both arms share the
/// same sine; the treated arm adds a constant offset.
struct SinusoidalShape {
    double x_lo = -5.0;
    double x_hi = 5.0;
    double amplitude = 2.0;
    double frequency = 1.0;
    double offset = 1.5;

    [[nodiscard]] double mu0(double x) const { return amplitude * std::sin(frequency * x); }
    [[nodiscard]] double mu1(double x) const { return mu0(x) + offset; }
};

/// One-dimensional sinusoidal outcome per arm. Treated units falling in
/// `missing_band` are dropped to simulate systematically missing treated data.
inline Dataset gen_sinusoidal_demo(Index n_control, Index n_treated, Band missing_band, double noise_sd,
                                   std::uint64_t seed, const SinusoidalShape& shape = {}) {
    require(n_control > 0 && n_treated > 0, "gen_sinusoidal_demo: counts must be positive");
    require(noise_sd >= 0.0, "gen_sinusoidal_demo: noise_sd must be >= 0");
    Rng rng(seed);
    std::uniform_real_distribution<double> ux(shape.x_lo, shape.x_hi);
    std::normal_distribution<double> noise(0.0, 1.0);

    std::vector<double> xs, ts, yf, ycf, m0, m1;
    auto emit = [&](double x, int arm) {
        const double a = shape.mu0(x), b = shape.mu1(x);
        const double e0 = noise_sd * noise(rng), e1 = noise_sd * noise(rng);
        xs.push_back(x);
        ts.push_back(arm);
        yf.push_back(arm ? b + e1 : a + e0);
        ycf.push_back(arm ? a + e0 : b + e1);
        m0.push_back(a);
        m1.push_back(b);
    };
    for (Index i = 0; i < n_control; ++i) emit(ux(rng), 0);
    for (Index i = 0; i < n_treated; ++i) {
        const double x = ux(rng);
        if (missing_band.contains(x)) {
            // Keep the draw sequence aligned with the band-free case.
            noise(rng);
            noise(rng);
            continue;
        }
        emit(x, 1);
    }
    const auto n = static_cast<Index>(xs.size());
    if (n == n_control) throw ValidationError("gen_sinusoidal_demo: empty arm after band removal");

    Dataset ds;
    ds.x = Eigen::Map<const Vector>(xs.data(), n);
    ds.t = to_vector(ts);
    ds.yf = to_vector(yf);
    ds.ycf = to_vector(ycf);
    ds.mu0 = to_vector(m0);
    ds.mu1 = to_vector(m1);
    return ds;
}

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Nuisance part g(X) of the partially linear process.
inline double partially_linear_g(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    double g = 1.5 * x[0];
    if (x.size() > 1) g += std::sin(2.0 * x[1]);
    if (x.size() > 2) g += 0.5 * x[2] * x[2];
    return g;
}

/// Y = theta * T + g(X) + eps, X ~ N(0, I_d), P(T=1|X) = logistic(confounding * x0).
/// mu0 carries g(X), so mu1 - mu0 = theta everywhere.
inline Dataset gen_partially_linear(Index n, Index d, double theta, double confounding, double noise_sd,
                                    std::uint64_t seed) {
    require(d >= 1, "gen_partially_linear: d must be >= 1");
    require(n > d, "gen_partially_linear: need n > d");
    require(noise_sd >= 0.0, "gen_partially_linear: noise_sd must be >= 0");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Dataset ds;
    ds.x.resize(n, d);
    ds.t.resize(n);
    ds.yf.resize(n);
    Vector mu0(n), mu1(n), ycf(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) ds.x(i, j) = normal(rng);
        const double g = partially_linear_g(ds.x.row(i));
        const double e = logistic(confounding * ds.x(i, 0));
        const double t = unif(rng) < e ? 1.0 : 0.0;
        const double eps0 = noise_sd * normal(rng);
        const double eps1 = noise_sd * normal(rng);
        mu0[i] = g;
        mu1[i] = g + theta;
        ds.t[i] = t;
        ds.yf[i] = t > 0.5 ? mu1[i] + eps1 : mu0[i] + eps0;
        ycf[i] = t > 0.5 ? mu0[i] + eps0 : mu1[i] + eps1;
    }
    ds.mu0 = mu0;
    ds.mu1 = mu1;
    ds.ycf = ycf;
    ds.validate();
    return ds;
}

/// Noiseless Y = theta * T + beta^T X with beta_j = 1 / (j + 1), X ~ N(0, I_d),
/// P(T=1|X) = logistic(confounding * x0). Every estimator built on linear
/// learners can recover theta exactly on this process.
inline Dataset gen_constant_effect_linear(Index n, Index d, double theta, double confounding, std::uint64_t seed) {
    require(d >= 1 && n > d, "gen_constant_effect_linear: need d >= 1 and n > d");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Dataset ds;
    ds.x.resize(n, d);
    ds.t.resize(n);
    ds.yf.resize(n);
    Vector mu0(n), mu1(n), ycf(n);
    for (Index i = 0; i < n; ++i) {
        double base = 0.0;
        for (Index j = 0; j < d; ++j) {
            ds.x(i, j) = normal(rng);
            base += ds.x(i, j) / static_cast<double>(j + 1);
        }
        ds.t[i] = unif(rng) < logistic(confounding * ds.x(i, 0)) ? 1.0 : 0.0;
        mu0[i] = base;
        mu1[i] = base + theta;
        ds.yf[i] = ds.t[i] > 0.5 ? mu1[i] : mu0[i];
        ycf[i] = ds.t[i] > 0.5 ? mu0[i] : mu1[i];
    }
    ds.mu0 = mu0;
    ds.mu1 = mu1;
    ds.ycf = ycf;
    ds.validate();
    return ds;
}

}  // namespace cmsel
