#include "cmsel/demo/demo.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace cmsel;

TEST(Demo, OrderingsAtDefaultSeed) {
    const auto rep = run_demo(demo_default_seed);
    EXPECT_TRUE(rep.mse_prefers_case1());
    EXPECT_TRUE(rep.pehe_prefers_case2());
    EXPECT_TRUE(rep.case3_worst_mse());
    EXPECT_TRUE(rep.case2_smaller_sum());
}

TEST(Demo, OrderingsHoldForNineOfTenSeeds) {
    int held = 0;
    for (std::uint64_t s = demo_default_seed; s < demo_default_seed + 10; ++s) held += run_demo(s).orderings_hold() ? 1 : 0;
    EXPECT_GE(held, 9);
}

TEST(Demo, ObservedSampleHasTheGapAndTestDoesNot) {
    const auto rep = run_demo(3);
    const DemoConfig cfg;
    for (Index i = 0; i < rep.observed.n(); ++i)
        if (rep.observed.t[i] > 0.5) EXPECT_FALSE(cfg.missing_band.contains(rep.observed.x(i, 0)));
    bool treated_in_band = false;
    for (Index i = 0; i < rep.test.n(); ++i)
        treated_in_band |= rep.test.t[i] > 0.5 && cfg.missing_band.contains(rep.test.x(i, 0));
    EXPECT_TRUE(treated_in_band);
}

TEST(Demo, MseMatchesHandComputation) {
    const auto rep = run_demo(4);
    const auto& c = rep.cases[2];
    double s = 0.0;
    for (Index i = 0; i < rep.observed.n(); ++i) {
        const Matrix xi = rep.observed.x.row(i);
        const double pred = rep.observed.t[i] > 0.5 ? c.mu1(xi)[0] : c.mu0(xi)[0];
        s += (rep.observed.yf[i] - pred) * (rep.observed.yf[i] - pred);
    }
    EXPECT_NEAR(c.mse, s / static_cast<double>(rep.observed.n()), 1e-12);
}

TEST(Demo, WritesDeterministicCsvs) {
    cmsel::testing::TempDir a, b;
    write_demo(run_demo(5), a.path());
    write_demo(run_demo(5), b.path());
    for (const char* f : {"demo_scores.csv", "demo_curves.csv"})
        EXPECT_EQ(csv::read_file(a.path() / f), csv::read_file(b.path() / f)) << f;
    const auto scores = csv::read(a.path() / "demo_scores.csv");
    ASSERT_EQ(scores.rows.size(), 3u);
    EXPECT_EQ(scores.header, (std::vector<std::string>{"case", "description", "mse", "pehe", "mse_plus_pehe"}));
    const auto curves = csv::read(a.path() / "demo_curves.csv");
    EXPECT_EQ(curves.rows.size(), 201u);
    EXPECT_EQ(curves.header.size(), 9u);
}
