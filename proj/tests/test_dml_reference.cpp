// Independent two-stage reference for the partially linear process: kNN
// nuisances, 2-fold cross-fit, scalar residual-on-residual slope. It shares
// nothing with the library beyond the data generator, and pins down the
// accuracy bound the DML estimator is held to.

#include "cmsel/data/generators.hpp"
#include "cmsel/estimators/meta_learners.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

using namespace cmsel;

namespace {

std::vector<double> knn_predict(const Matrix& x, const std::vector<Index>& train, const std::vector<double>& target,
                                const std::vector<Index>& query, int k) {
    std::vector<double> out;
    std::vector<std::pair<double, std::size_t>> dist(train.size());
    for (Index q : query) {
        for (std::size_t j = 0; j < train.size(); ++j) dist[j] = {(x.row(q) - x.row(train[j])).squaredNorm(), j};
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        double s = 0.0;
        for (int i = 0; i < k; ++i) s += target[dist[static_cast<std::size_t>(i)].second];
        out.push_back(s / k);
    }
    return out;
}

double reference_theta(const Dataset& ds, int k) {
    std::vector<Index> a, b;
    for (Index i = 0; i < ds.n(); ++i) (i % 2 == 0 ? a : b).push_back(i);
    std::vector<double> yres(static_cast<std::size_t>(ds.n())), tres(static_cast<std::size_t>(ds.n()));
    for (int pass = 0; pass < 2; ++pass) {
        const auto& fit = pass == 0 ? a : b;
        const auto& held = pass == 0 ? b : a;
        std::vector<double> y, t;
        for (Index r : fit) {
            y.push_back(ds.yf[r]);
            t.push_back(ds.t[r]);
        }
        const auto my = knn_predict(ds.x, fit, y, held, k);
        const auto mt = knn_predict(ds.x, fit, t, held, k);
        for (std::size_t j = 0; j < held.size(); ++j) {
            const auto r = static_cast<std::size_t>(held[j]);
            yres[r] = ds.yf[held[j]] - my[j];
            tres[r] = ds.t[held[j]] - mt[j];
        }
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < yres.size(); ++i) {
        num += yres[i] * tres[i];
        den += tres[i] * tres[i];
    }
    return num / den;
}

}  // namespace

TEST(DmlReference, BruteForceTwoStageMeetsBound) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto ds = gen_partially_linear(2000, 5, 2.0, 1.0, 1.0, seed);
        const double theta = reference_theta(ds, 25);
        EXPECT_LT(std::abs(theta - 2.0), 0.15) << "seed " << seed << " theta " << theta;
    }
}

TEST(DmlReference, BoostedDmlMeetsSameBound) {
    auto spec = default_spec(Family::gbt_light);
    spec.params["max_depth"] = 5.0;
    spec.params["reg_lambda"] = 10.0;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        auto ds = gen_partially_linear(2000, 5, 2.0, 1.0, 1.0, seed);
        EstimatorOptions opt;
        opt.fit.n_estimators = 100;
        opt.seed = seed;
        auto fc = fit_dml_learner(spec, ds, opt);
        const double ate = fc.predict_cate(ds.x).mean();
        EXPECT_LT(std::abs(ate - 2.0), 0.15) << "seed " << seed << " ate " << ate;
        EXPECT_TRUE(fc.diagnostics().coverage_exact());
    }
}
