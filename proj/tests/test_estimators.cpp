#include "cmsel/data/generators.hpp"
#include "cmsel/estimators/meta_learners.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cmsel;

namespace {

LearnerSpec near_ols() {
    auto s = default_spec(Family::l2_linear);
    s.params["alpha"] = 1e-10;
    return s;
}

Dataset from_columns(const Matrix& x, const Vector& t, const Vector& y) {
    Dataset ds;
    ds.x = x;
    ds.t = t;
    ds.yf = y;
    ds.validate();
    return ds;
}

/// Y = 2 T + X, one covariate.
Dataset noiseless_sl_data(Index n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix x(n, 1);
    Vector t(n), y(n);
    for (Index i = 0; i < n; ++i) {
        x(i, 0) = z(rng);
        t[i] = i % 3 == 0 ? 1.0 : 0.0;
        y[i] = 2.0 * t[i] + x(i, 0);
    }
    return from_columns(x, t, y);
}

double max_abs_dev(const Vector& v, double c) { return (v.array() - c).abs().maxCoeff(); }

}  // namespace

TEST(Estimator, ParseNamesAndOutOfScope) {
    EXPECT_EQ(parse_estimator("DML"), Estimator::DML);
    try {
        parse_estimator("causal_forest");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("estimator out of scope"), std::string::npos);
    }
    EXPECT_THROW(parse_estimator("XX"), ValidationError);
    CandidateSpec cs{Estimator::TL, default_spec(Family::l2_linear)};
    EXPECT_EQ(cs.id(), "TL/l2_linear/alpha=1;max_iter=1000");
}

TEST(SLearner, NoiselessLinearRecoversEffect) {
    auto ds = noiseless_sl_data(300, 1);
    auto fc = fit_s_learner(near_ols(), ds);
    EXPECT_LT(max_abs_dev(fc.predict_cate(ds.x), 2.0), 1e-6);
    EXPECT_TRUE(fc.has_outcomes());
    EXPECT_TRUE(fc.mu_risk_r2_eligible());
}

TEST(SLearner, TreeThatIgnoresTreatmentGivesZeroEffect) {
    Matrix x(8, 1);
    x << -4, -3, -2, -1, 1, 2, 3, 4;
    Vector t(8);
    t << 1, 0, 1, 0, 1, 0, 1, 0;
    Vector y = (x.array() > 0).cast<double>() * 10.0 + 0.1 * t.array();
    auto spec = default_spec(Family::tree);
    spec.params["max_depth"] = 1.0;
    auto fc = fit_s_learner(spec, from_columns(x, t, y));
    EXPECT_EQ(fc.predict_cate(x), Vector::Zero(8));
}

TEST(SLearner, CateIsDifferenceOfHeads) {
    auto ds = gen_partially_linear(200, 3, 1.0, 0.5, 1.0, 2);
    for (auto f : {Family::l2_linear, Family::tree, Family::kernel_ridge}) {
        auto fc = fit_s_learner(default_spec(f), ds);
        EXPECT_EQ(fc.predict_cate(ds.x), fc.predict_outcome(1, ds.x) - fc.predict_outcome(0, ds.x));
    }
}

TEST(TLearner, IdenticalArmsGiveZeroEffect) {
    Matrix x(6, 1);
    x << 0, 1, 2, 0, 1, 2;
    Vector t(6);
    t << 1, 1, 1, 0, 0, 0;
    Vector y(6);
    y << 1, 5, 2, 1, 5, 2;
    for (auto f : {Family::l2_linear, Family::tree, Family::gbt_light}) {
        EstimatorOptions opt;
        opt.fit.n_estimators = 20;
        auto fc = fit_t_learner(default_spec(f), from_columns(x, t, y), opt);
        EXPECT_EQ(fc.predict_cate(x), Vector::Zero(6)) << to_string(f);
    }
}

TEST(TLearner, InterceptGapThree) {
    Rng rng(3);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix x(60, 2);
    Vector t(60), y(60);
    for (Index i = 0; i < 60; ++i) {
        x(i, 0) = z(rng);
        x(i, 1) = z(rng);
        t[i] = i % 2;
        y[i] = 0.5 * x(i, 0) - x(i, 1) + 3.0 * t[i];
    }
    auto fc = fit_t_learner(near_ols(), from_columns(x, t, y));
    EXPECT_LT(max_abs_dev(fc.predict_cate(x), 3.0), 1e-6);
}

TEST(TLearner, SingleUnitArmRejected) {
    Matrix x(4, 1);
    x << 0, 1, 2, 3;
    Vector t(4);
    t << 1, 0, 0, 0;
    EXPECT_THROW(fit_t_learner(near_ols(), from_columns(x, t, Vector::Ones(4))), ValidationError);
}

TEST(XLearner, ConstantHalfPropensityAveragesArmModels) {
    auto ds = gen_partially_linear(200, 2, 1.0, 0.5, 1.0, 4);
    const auto spec = default_spec(Family::l2_linear);
    EstimatorOptions opt;
    opt.hooks.constant_propensity = 0.5;
    auto fc = fit_x_learner(spec, ds, opt);
    // Rebuild the two imputed-effect regressions directly.
    const auto c = ds.arm_indices(0), tr = ds.arm_indices(1);
    auto mu0 = fit_regressor(spec, take_rows(ds.x, c), take(ds.yf, c));
    auto mu1 = fit_regressor(spec, take_rows(ds.x, tr), take(ds.yf, tr));
    const Vector d1 = take(ds.yf, tr) - mu0.predict(take_rows(ds.x, tr));
    const Vector d0 = mu1.predict(take_rows(ds.x, c)) - take(ds.yf, c);
    auto tau1 = fit_regressor(spec, take_rows(ds.x, tr), d1);
    auto tau0 = fit_regressor(spec, take_rows(ds.x, c), d0);
    const Vector expected = 0.5 * (tau0.predict(ds.x) + tau1.predict(ds.x));
    EXPECT_LT((fc.predict_cate(ds.x) - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_FALSE(fc.has_outcomes());
}

TEST(XLearner, NoiselessConstantEffect) {
    auto ds = gen_constant_effect_linear(300, 3, 1.5, 0.5, 5);
    auto fc = fit_x_learner(near_ols(), ds);
    ASSERT_TRUE(fc.diagnostics().imputed_effect);
    EXPECT_LT(max_abs_dev(*fc.diagnostics().imputed_effect, 1.5), 1e-6);
    EXPECT_LT(max_abs_dev(fc.predict_cate(ds.x), 1.5), 1e-6);
}

TEST(DrLearner, OraclePropensityNoiselessGivesExactPseudoOutcome) {
    auto ds = gen_constant_effect_linear(300, 3, 2.0, 0.0, 6);
    EstimatorOptions opt;
    opt.hooks.constant_propensity = 0.5;
    auto fc = fit_dr_learner(near_ols(), ds, opt);
    ASSERT_TRUE(fc.diagnostics().pseudo_outcome);
    EXPECT_LT(max_abs_dev(*fc.diagnostics().pseudo_outcome, 2.0), 1e-6);
    EXPECT_LT(max_abs_dev(fc.predict_cate(ds.x), 2.0), 1e-6);
    EXPECT_TRUE(fc.diagnostics().coverage_exact());
    EXPECT_EQ(fc.diagnostics().coverage.size(), 2u);
}

TEST(DrLearner, WrongPropensityCorrectOutcomesStillUnbiasedHandExample) {
    Matrix x(4, 1);
    x << 0, 1, 2, 3;
    Vector t(4);
    t << 1, 0, 1, 0;
    Vector mu0(4), mu1(4);
    mu0 << 0, 1, 2, 3;
    mu1 << 1, 3, 2, 7;
    Vector y(4);
    y << 1, 1, 2, 3;  // factual arm of each row, no noise
    EstimatorOptions opt;
    opt.n_crossfit = 2;
    opt.hooks.mu0 = mu0;
    opt.hooks.mu1 = mu1;
    opt.hooks.constant_propensity = 0.2;
    auto fc = fit_dr_learner(default_spec(Family::l2_linear), from_columns(x, t, y), opt);
    // Residuals vanish, so psi = mu1 - mu0 = (1, 2, 0, 4) and its mean is the ATE 7/4.
    EXPECT_DOUBLE_EQ(fc.diagnostics().pseudo_outcome->mean(), 1.75);
    EXPECT_FALSE(fc.has_outcomes());
}

TEST(DrLearner, PseudoOutcomeMeanEqualsAipwEstimate) {
    auto ds = gen_partially_linear(300, 3, 1.0, 1.0, 1.0, 7);
    auto spec = default_spec(Family::tree);
    spec.params["max_depth"] = 4.0;
    auto fc = fit_dr_learner(spec, ds);
    const auto& psi = *fc.diagnostics().pseudo_outcome;
    EXPECT_TRUE(fc.diagnostics().coverage_exact());
    EXPECT_EQ(fc.diagnostics().coverage.size(), 3u);
    EXPECT_TRUE(fc.has_outcomes());
    EXPECT_FALSE(fc.mu_risk_r2_eligible());
    // Recompute the AIPW estimate from scratch with the same folds and seeds.
    const auto folds = crossfit_folds(ds.t, 5, derive_seed(0, "DR", "crossfit"));
    Vector m0(ds.n()), m1(ds.n()), e(ds.n());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto& fit = folds[f].fit_idx;
        IndexList r0, r1;
        for (Index r : fit) (ds.t[r] > 0.5 ? r1 : r0).push_back(r);
        const auto u = static_cast<std::uint64_t>(f);
        auto a = fit_regressor(spec, take_rows(ds.x, r0), take(ds.yf, r0), std::nullopt, {}, derive_seed(0, "DR", "mu0", u));
        auto b = fit_regressor(spec, take_rows(ds.x, r1), take(ds.yf, r1), std::nullopt, {}, derive_seed(0, "DR", "mu1", u));
        auto c = fit_propensity(spec, take_rows(ds.x, fit), take(ds.t, fit), std::nullopt, {}, derive_seed(0, "DR", "e", u));
        const Matrix xv = take_rows(ds.x, folds[f].val_idx);
        const Vector pa = a.predict(xv), pb = b.predict(xv), pc = c.predict(xv);
        for (std::size_t j = 0; j < folds[f].val_idx.size(); ++j) {
            const Index r = folds[f].val_idx[j];
            m0[r] = pa[static_cast<Index>(j)];
            m1[r] = pb[static_cast<Index>(j)];
            e[r] = pc[static_cast<Index>(j)];
        }
    }
    double aipw = 0.0;
    for (Index i = 0; i < ds.n(); ++i)
        aipw += m1[i] - m0[i] + ds.t[i] * (ds.yf[i] - m1[i]) / e[i] - (1 - ds.t[i]) * (ds.yf[i] - m0[i]) / (1 - e[i]);
    aipw /= static_cast<double>(ds.n());
    EXPECT_NEAR(psi.mean(), aipw, 1e-12);
}

TEST(DrLearner, MoreFoldsThanSmallerArmRejected) {
    Matrix x(10, 1);
    x.col(0) = Vector::LinSpaced(10, 0, 9);
    Vector t = Vector::Zero(10);
    t.head(3).setOnes();
    EXPECT_THROW(fit_dr_learner(near_ols(), from_columns(x, t, x.col(0))), ValidationError);
}

TEST(DmlLearner, OracleNuisancesNoiselessExact) {
    const double conf = 1.0;
    auto ds = gen_partially_linear(400, 3, 2.0, conf, 0.0, 8);
    Vector e(ds.n()), m(ds.n());
    for (Index i = 0; i < ds.n(); ++i) {
        e[i] = logistic(conf * ds.x(i, 0));
        m[i] = (*ds.mu0)[i] + 2.0 * e[i];
    }
    EstimatorOptions opt;
    opt.hooks.e = e;
    opt.hooks.m = m;
    auto fc = fit_dml_learner(near_ols(), ds, opt);
    const Vector& coef = *fc.diagnostics().dml_coef;
    EXPECT_NEAR(coef[0], 2.0, 1e-10);
    EXPECT_LT(coef.tail(3).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_FALSE(fc.diagnostics().ridge_fallback);
    EXPECT_FALSE(fc.has_outcomes());
}

TEST(DmlLearner, ConstantEffectSlopesCenteredOnZero) {
    // Repeat-seed estimate: the mean of each slope lies within 3 Monte-Carlo sd of 0.
    auto spec = default_spec(Family::tree);
    spec.params["max_depth"] = 4.0;
    spec.params["min_samples_leaf"] = 0.02;
    const int reps = 12;
    Matrix slopes(reps, 3);
    for (int r = 0; r < reps; ++r) {
        auto ds = gen_partially_linear(400, 3, 2.0, 1.0, 1.0, 100 + static_cast<std::uint64_t>(r));
        EstimatorOptions opt;
        opt.seed = static_cast<std::uint64_t>(r);
        auto fc = fit_dml_learner(spec, ds, opt);
        EXPECT_TRUE(fc.diagnostics().coverage_exact());
        slopes.row(r) = fc.diagnostics().dml_coef->tail(3).transpose();
    }
    for (Index j = 0; j < 3; ++j) {
        const Vector col = slopes.col(j);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().sum() / (reps - 1));
        EXPECT_LT(std::abs(mean), 3.0 * sd / std::sqrt(static_cast<double>(reps))) << "slope " << j;
    }
}

TEST(DmlLearner, RankDeficientSecondStageFallsBackToRidge) {
    auto ds = gen_partially_linear(100, 2, 1.0, 0.0, 1.0, 9);
    ds.x.col(1) = ds.x.col(0);  // duplicated covariate
    EstimatorOptions opt;
    opt.hooks.constant_propensity = 0.5;
    auto fc = fit_dml_learner(default_spec(Family::l2_linear), ds, opt);
    EXPECT_TRUE(fc.diagnostics().ridge_fallback);
    EXPECT_TRUE(fc.predict_cate(ds.x).allFinite());
}

TEST(IpswLearner, HalfPropensityMatchesTLearner) {
    auto ds = gen_partially_linear(200, 3, 1.0, 1.0, 1.0, 10);
    for (auto f : {Family::l2_linear, Family::kernel_ridge, Family::tree, Family::gbt_cat}) {
        EstimatorOptions opt;
        opt.fit.n_estimators = 10;
        opt.hooks.constant_propensity = 0.5;
        const Vector a = fit_ipsw_learner(default_spec(f), ds, opt).predict_cate(ds.x);
        const Vector b = fit_t_learner(default_spec(f), ds, opt).predict_cate(ds.x);
        EXPECT_EQ(a, b) << to_string(f);
    }
}

TEST(IpswLearner, WeightsBoundedByClipping) {
    auto ds = gen_partially_linear(300, 2, 1.0, 4.0, 1.0, 11);
    const Vector e = fit_propensity(default_spec(Family::tree), ds.x, ds.t).predict(ds.x);
    const Vector w = inverse_propensity_weights(ds.t, e);
    EXPECT_GE(w.minCoeff(), 1.0 / 0.99 - 1e-12);
    EXPECT_LE(w.maxCoeff(), 1.0 / 0.01 + 1e-9);
}

TEST(IpswLearner, HandWeightedLeastSquares) {
    // Treated arm x=(0,1,2), y=(0,1,4), e=(0.5,0.5,0.25) -> weights proportional to (1,1,2):
    // slope 23/11, intercept -4/11. Unweighted: slope 2, intercept -1/3. Controls are all zero.
    Matrix x(6, 1);
    x << 0, 1, 2, 0, 1, 2;
    Vector t(6);
    t << 1, 1, 1, 0, 0, 0;
    Vector y(6);
    y << 0, 1, 4, 0, 0, 0;
    Vector e(6);
    e << 0.5, 0.5, 0.25, 0.5, 0.5, 0.5;
    EstimatorOptions opt;
    opt.hooks.e = e;
    const auto ds = from_columns(x, t, y);
    Matrix q(1, 1);
    q << 3.0;
    EXPECT_NEAR(fit_ipsw_learner(near_ols(), ds, opt).predict_cate(q)[0], 65.0 / 11.0, 1e-6);
    EXPECT_NEAR(fit_t_learner(near_ols(), ds).predict_cate(q)[0], 17.0 / 3.0, 1e-6);
}

TEST(FittedCandidate, PredictContract) {
    auto ds = gen_partially_linear(120, 2, 1.0, 0.5, 1.0, 12);
    for (auto est : all_estimators) {
        EstimatorOptions opt;
        opt.fit.n_estimators = 5;
        auto fc = fit_candidate({est, default_spec(Family::tree)}, ds, opt);
        EXPECT_EQ(fc.predict_cate(Matrix(0, 2)).size(), 0);
        EXPECT_THROW(fc.predict_cate(Matrix::Zero(3, 5)), ValidationError);
        Matrix rep(3, 2);
        rep.rowwise() = ds.x.row(0);
        const Vector p = fc.predict_cate(rep);
        EXPECT_EQ(p[0], p[1]);
        EXPECT_EQ(p[1], p[2]);
        EXPECT_TRUE(fc.predict_cate(ds.x).allFinite());
        const bool outcomes = est == Estimator::SL || est == Estimator::TL || est == Estimator::IPSW || est == Estimator::DR;
        EXPECT_EQ(fc.has_outcomes(), outcomes) << to_string(est);
        EXPECT_EQ(fc.mu_risk_r2_eligible(), outcomes && est != Estimator::DR) << to_string(est);
    }
}

TEST(FittedCandidate, DeterministicGivenSeed) {
    auto ds = gen_partially_linear(150, 3, 1.0, 0.5, 1.0, 13);
    for (auto est : all_estimators) {
        EstimatorOptions opt;
        opt.fit.n_estimators = 8;
        opt.seed = 77;
        CandidateSpec cs{est, default_spec(Family::random_forest)};
        EXPECT_EQ(fit_candidate(cs, ds, opt).predict_cate(ds.x), fit_candidate(cs, ds, opt).predict_cate(ds.x))
            << to_string(est);
    }
}

TEST(FittedCandidate, ErrorsCarryCandidateId) {
    Matrix x(5, 1);
    x << 0, 1, 2, 3, 4;
    Vector t(5);
    t << 1, 0, 0, 0, 0;
    try {
        fit_candidate({Estimator::TL, default_spec(Family::l2_linear)}, from_columns(x, t, Vector::Ones(5)));
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("TL/l2_linear/"), std::string::npos) << e.what();
    }
}

TEST(OracleRecovery, EveryEstimatorWithLinearLearnerOnNoiselessData) {
    auto ds = gen_constant_effect_linear(600, 4, 1.5, 0.5, 14);
    auto spec = default_spec(Family::l2_linear);
    spec.params["alpha"] = 0.001;
    for (auto est : all_estimators) {
        auto fc = fit_candidate({est, spec}, ds);
        const double ate_err = std::abs(fc.predict_cate(ds.x).mean() - 1.5);
        EXPECT_LT(ate_err, 1e-3) << to_string(est);
    }
}
