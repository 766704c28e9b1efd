#pragma once

#include "cmsel/core/csv.hpp"
#include "cmsel/data/generators.hpp"
#include "cmsel/learners/fit.hpp"
#include "cmsel/metrics/truth.hpp"

#include <array>
#include <filesystem>
#include <functional>

namespace cmsel {

inline constexpr std::uint64_t demo_default_seed = 7;

/// Constants of the demonstration. None of them is tuned per seed.
struct DemoConfig {
    Index n_control = 200;
    Index n_treated = 200;
    Band missing_band{-2.0, 2.0};
    double noise_sd = 0.3;
    Index n_test = 1000;
    Index n_curve = 201;
    // rbf kernel ridge used as the flexible per-arm fit
    double gamma = 10.0;
    double alpha = 0.01;
};

struct DemoCase {
    std::string name;
    std::string description;
    std::function<Vector(const Matrix&)> mu0;
    std::function<Vector(const Matrix&)> mu1;
    double mse = 0.0;   // factual squared error on the observed fitting sample
    double pehe = 0.0;  // against true effects on a fresh sample without the band gap
};

struct DemoReport {
    std::uint64_t seed = 0;
    Dataset observed;
    Dataset test;
    std::array<DemoCase, 3> cases;

    [[nodiscard]] bool mse_prefers_case1() const { return cases[0].mse < cases[1].mse; }
    [[nodiscard]] bool pehe_prefers_case2() const { return cases[1].pehe < cases[0].pehe; }
    [[nodiscard]] bool case3_worst_mse() const { return cases[2].mse > cases[0].mse && cases[2].mse > cases[1].mse; }
    [[nodiscard]] bool case2_smaller_sum() const {
        return cases[1].mse + cases[1].pehe < cases[0].mse + cases[0].pehe;
    }
    [[nodiscard]] bool orderings_hold() const {
        return mse_prefers_case1() && pehe_prefers_case2() && case3_worst_mse() && case2_smaller_sum();
    }
};

namespace detail {

inline double factual_mse(const DemoCase& c, const Dataset& ds) {
    const Vector m0 = c.mu0(ds.x), m1 = c.mu1(ds.x);
    double s = 0.0;
    for (Index i = 0; i < ds.n(); ++i) {
        const double r = ds.yf[i] - (ds.t[i] > 0.5 ? m1[i] : m0[i]);
        s += r * r;
    }
    return s / static_cast<double>(ds.n());
}

}  // namespace detail

/// Three fits of the same observed sample:
///  1. an rbf kernel ridge per arm; the treated model has no data in the gap
///     and falls back towards zero there.
///  2. the control model for both arms, the treated arm shifted by the mean
///     treated residual, so the control trend carries across the gap.
///  3. leakage: a flat outcome model plus the mean true effect of the test
///     sample. Near-perfect effects, poor outcomes.
inline DemoReport run_demo(std::uint64_t seed, const DemoConfig& cfg = {}) {
    DemoReport rep;
    rep.seed = seed;
    rep.observed = gen_sinusoidal_demo(cfg.n_control, cfg.n_treated, cfg.missing_band, cfg.noise_sd,
                                       derive_seed(seed, "demo", "observed"));
    rep.test = gen_sinusoidal_demo(cfg.n_test / 2, cfg.n_test - cfg.n_test / 2, Band::none(), cfg.noise_sd,
                                   derive_seed(seed, "demo", "test"));
    const auto& obs = rep.observed;
    const auto rows0 = obs.arm_indices(0), rows1 = obs.arm_indices(1);

    LearnerSpec kr{Family::kernel_ridge,
                   {{"alpha", cfg.alpha}, {"gamma", cfg.gamma}, {"kernel", std::string("rbf")}, {"degree", 3.0}}};
    const auto f0 = fit_regressor(kr, take_rows(obs.x, rows0), take(obs.yf, rows0));
    const auto f1 = fit_regressor(kr, take_rows(obs.x, rows1), take(obs.yf, rows1));
    auto control = [f0](const Matrix& x) { return f0.predict(x); };

    const double shift = (take(obs.yf, rows1) - f0.predict(take_rows(obs.x, rows1))).mean();
    const double y0_mean = take(obs.yf, rows0).mean();
    const double leaked = rep.test.true_effect().mean();

    rep.cases[0] = {"case1", "flexible fit per arm", control, [f1](const Matrix& x) { return f1.predict(x); }};
    rep.cases[1] = {"case2", "control trend shared by both arms", control,
                    [f0, shift](const Matrix& x) { return Vector(f0.predict(x).array() + shift); }};
    rep.cases[2] = {"case3", "leaked test effect on a flat outcome model",
                    [y0_mean](const Matrix& x) { return Vector(Vector::Constant(x.rows(), y0_mean)); },
                    [y0_mean, leaked](const Matrix& x) { return Vector(Vector::Constant(x.rows(), y0_mean + leaked)); }};

    const Vector tau_test = rep.test.true_effect();
    for (auto& c : rep.cases) {
        c.mse = detail::factual_mse(c, obs);
        c.pehe = pehe(c.mu1(rep.test.x) - c.mu0(rep.test.x), tau_test);
    }
    return rep;
}

inline std::string demo_scores_csv(const DemoReport& rep) {
    std::string out = csv::join({"case", "description", "mse", "pehe", "mse_plus_pehe"}) + "\n";
    for (const auto& c : rep.cases)
        out += csv::join({c.name, c.description, format_double(c.mse), format_double(c.pehe), format_double(c.mse + c.pehe)}) + "\n";
    return out;
}

/// Dense curves over the covariate range: true means and each case's fits.
inline std::string demo_curves_csv(const DemoReport& rep, const DemoConfig& cfg = {}, const SinusoidalShape& shape = {}) {
    const Vector xs = Vector::LinSpaced(cfg.n_curve, shape.x_lo, shape.x_hi);
    const Matrix x = xs;
    std::vector<std::string> header = {"x", "mu0", "mu1"};
    std::vector<Vector> cols;
    for (const auto& c : rep.cases) {
        header.push_back(c.name + "_mu0");
        header.push_back(c.name + "_mu1");
        cols.push_back(c.mu0(x));
        cols.push_back(c.mu1(x));
    }
    std::string out = csv::join(header) + "\n";
    for (Index i = 0; i < xs.size(); ++i) {
        std::vector<std::string> row = {format_double(xs[i]), format_double(shape.mu0(xs[i])), format_double(shape.mu1(xs[i]))};
        for (const auto& c : cols) row.push_back(format_double(c[i]));
        out += csv::join(row) + "\n";
    }
    return out;
}

inline void write_demo(const DemoReport& rep, const std::filesystem::path& out_dir, const DemoConfig& cfg = {}) {
    csv::write_atomic(out_dir / "demo_scores.csv", demo_scores_csv(rep));
    csv::write_atomic(out_dir / "demo_curves.csv", demo_curves_csv(rep, cfg));
}

}  // namespace cmsel
