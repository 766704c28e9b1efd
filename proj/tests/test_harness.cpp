#include "cmsel/data/generators.hpp"
#include "cmsel/harness/analysis.hpp"
#include "cmsel/harness/config.hpp"

#include <gtest/gtest.h>

using namespace cmsel;

namespace {

/// Records for one iteration: validation metrics on a single fold, test
/// metrics unfolded. `values[m][c]` is candidate c's value for metric m;
/// NaN marks an unavailable cell.
std::vector<MetricRecord> table_records(const std::vector<std::string>& ids, int iter,
                                        const std::map<std::string, std::vector<double>>& values) {
    std::vector<MetricRecord> out;
    for (const auto& [m, vs] : values)
        for (std::size_t c = 0; c < ids.size(); ++c) {
            const bool val = metric_info(m).kind == MetricKind::validation;
            Score s = std::isnan(vs[c]) ? Score::unavailable("n/a") : Score::of(vs[c]);
            out.push_back({ids[c], iter, val ? std::optional<int>(0) : std::nullopt, m, s});
        }
    return out;
}

std::string cid(const char* est, Family f, double alpha) {
    auto spec = default_spec(f);
    spec.params["alpha"] = alpha;
    return CandidateSpec{parse_estimator(est), spec}.id();
}

const std::vector<std::string> three = {cid("SL", Family::l2_linear, 0.1), cid("SL", Family::l2_linear, 1),
                                        cid("SL", Family::l2_linear, 10)};

struct SmallRun {
    Dataset data;
    SplitPlan plan;
    RunConfig cfg;
};

SmallRun small_run(int n_iter, int n_folds) {
    SmallRun r;
    r.data = gen_partially_linear(240, 3, 1.0, 0.5, 0.5, 17);
    r.plan = build_split_plan(r.data, n_iter, 0.2, n_folds, 5);
    r.cfg.seed = 3;
    r.cfg.fit.n_estimators = 15;
    r.cfg.validation.aux.fit.n_estimators = 15;
    r.cfg.validation.aux.grids[Family::tree] = {{"max_depth", {ParamValue(2.0), ParamValue(4.0)}},
                                                {"min_samples_leaf", {ParamValue(5.0)}}};
    return r;
}

}  // namespace

// ---------------------------------------------------------------- run_grid

TEST(RunGrid, RecordCountForOneCandidate) {
    auto r = small_run(1, 10);
    r.cfg.candidates = {{Estimator::TL, default_spec(Family::l2_linear)}};
    r.cfg.val_metrics = {"mu_risk", "mu_risk_r2", "tau_match_pehe/k1", "policy_risk"};
    r.cfg.test_metrics = {"test_pehe", "test_e_ate"};
    const auto res = run_grid(r.plan, [&](std::size_t) { return r.data; }, r.cfg);
    EXPECT_EQ(res.records.size(), 42u);
    EXPECT_FALSE(res.partial());
    for (const auto& rec : res.records) EXPECT_TRUE(rec.score.available()) << rec.metric << " " << rec.score.note;
}

TEST(RunGrid, IdenticalRecordsAcrossParallelism) {
    auto r = small_run(2, 3);
    auto tree = default_spec(Family::tree);
    tree.params["max_depth"] = 3.0;
    r.cfg.candidates = {{Estimator::SL, default_spec(Family::l2_linear)},
                        {Estimator::DR, tree},
                        {Estimator::XL, default_spec(Family::gbt_light)},
                        {Estimator::DML, default_spec(Family::random_forest)}};
    r.cfg.val_metrics = {"mu_risk", "tau_plugin_pehe/TL-DT", "tau_match_ate/k3", "tau_rscore/dt", "policy_risk"};
    r.cfg.test_metrics = {"test_pehe", "test_policy_risk"};
    r.cfg.jobs = 1;
    const auto one = run_grid(r.plan, [&](std::size_t) { return r.data; }, r.cfg);
    r.cfg.jobs = 8;
    const auto eight = run_grid(r.plan, [&](std::size_t) { return r.data; }, r.cfg);
    EXPECT_EQ(records_to_csv(one.records), records_to_csv(eight.records));
    EXPECT_EQ(one.records.size(), 4u * 2u * (3u * 5u + 2u));
}

TEST(RunGrid, FailureOnOneFoldIsIsolated) {
    auto r = small_run(1, 5);
    r.cfg.candidates = {{Estimator::TL, default_spec(Family::l2_linear)}, {Estimator::SL, default_spec(Family::l2_linear)}};
    r.cfg.val_metrics = {"mu_risk", "tau_match_pehe/k1"};
    r.cfg.test_metrics = {"test_pehe"};
    r.cfg.before_fit = [](const CandidateSpec& c, int, std::optional<int> fold) {
        if (c.estimator == Estimator::TL && fold == 3) throw NumericError("injected");
    };
    const auto res = run_grid(r.plan, [&](std::size_t) { return r.data; }, r.cfg);
    EXPECT_TRUE(res.partial());
    ASSERT_EQ(res.failures.size(), 1u);
    EXPECT_NE(res.failures[0].find("fold 3"), std::string::npos);
    EXPECT_EQ(res.records.size(), 2u * (5u * 2u + 1u));
    for (const auto& rec : res.records) {
        const bool broken = rec.candidate.rfind("TL/", 0) == 0 && rec.fold == 3;
        EXPECT_EQ(is_failure(rec.score), broken) << rec.candidate << " " << rec.metric;
        EXPECT_EQ(rec.score.available(), !broken);
    }
    const auto table = aggregate_and_merge(res.records);
    for (const auto& row : table.rows) EXPECT_EQ(row.failed, row.key.estimator == "TL");
    EXPECT_EQ(select_winner(table, "mu_risk", 0).substr(0, 3), "SL/");
}

TEST(RunGrid, RejectsBadConfigBeforeFitting) {
    auto r = small_run(1, 3);
    int fits = 0;
    r.cfg.before_fit = [&](const CandidateSpec&, int, std::optional<int>) { ++fits; };
    r.cfg.candidates = {{Estimator::TL, default_spec(Family::l2_linear)}};
    r.cfg.val_metrics = {"test_pehe"};
    EXPECT_THROW(run_grid(r.plan, [&](std::size_t) { return r.data; }, r.cfg), ValidationError);
    r.cfg.val_metrics = {"nonsense"};
    EXPECT_THROW(run_grid(r.plan, [&](std::size_t) { return r.data; }, r.cfg), ValidationError);
    EXPECT_EQ(fits, 0);
}

TEST(Records, CsvRoundTrip) {
    std::vector<MetricRecord> recs = {{"TL/tree/max_depth=2;min_samples_leaf=1", 0, 1, "mu_risk", Score::of(0.125)},
                                      {"TL/tree/max_depth=2;min_samples_leaf=1", 0, std::nullopt, "test_pehe",
                                       Score::unavailable("failed: a, \"quoted\" reason")},
                                      {"SL/l2_linear/alpha=1;max_iter=1000", 2, 0, "tau_rscore/kr", Score::of(-1e-17)}};
    const auto text = records_to_csv(recs);
    EXPECT_EQ(parse_records(text), recs);
    EXPECT_EQ(records_to_csv(parse_records(text)), text);
    EXPECT_THROW(parse_records("candidate,iter\nx,0\n"), ValidationError);
}

// ---------------------------------------------------------------- aggregation

TEST(Aggregate, FoldMeanAndContagion) {
    std::vector<MetricRecord> recs;
    for (int f = 0; f < 10; ++f) {
        recs.push_back({three[0], 0, f, "mu_risk", Score::of(f + 1.0)});
        recs.push_back({three[1], 0, f, "mu_risk", f == 4 ? Score::unavailable("why") : Score::of(0.0)});
    }
    recs.push_back({three[0], 0, std::nullopt, "test_pehe", Score::of(2.0)});
    recs.push_back({three[1], 0, std::nullopt, "test_pehe", Score::of(3.0)});
    const auto table = aggregate_and_merge(recs);
    ASSERT_EQ(table.rows.size(), 2u);
    EXPECT_EQ(table.n_folds, 10);
    EXPECT_DOUBLE_EQ(*table.rows[0].cell("mu_risk").value, 5.5);
    EXPECT_FALSE(table.rows[1].cell("mu_risk").available());
    EXPECT_NE(table.rows[1].cell("mu_risk").note.find("fold 4"), std::string::npos);
    EXPECT_DOUBLE_EQ(*table.rows[1].cell("test_pehe").value, 3.0);
}

TEST(Aggregate, RowCountAndGaps) {
    std::vector<MetricRecord> recs;
    for (int it = 0; it < 3; ++it) {
        auto r = table_records(three, it, {{"mu_risk", {1, 2, 3}}, {"test_pehe", {1, 2, 3}}});
        recs.insert(recs.end(), r.begin(), r.end());
    }
    EXPECT_EQ(aggregate_and_merge(recs).rows.size(), 9u);

    auto missing_test = recs;
    missing_test.erase(std::find_if(missing_test.begin(), missing_test.end(),
                                    [](const MetricRecord& r) { return r.metric == "test_pehe" && r.iter == 1; }));
    try {
        aggregate_and_merge(missing_test);
        FAIL() << "expected a gap error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("iter 1"), std::string::npos) << e.what();
    }

    auto missing_fold = recs;
    missing_fold.push_back({three[0], 0, 2, "mu_risk", Score::of(1.0)});
    EXPECT_THROW(aggregate_and_merge(missing_fold), ValidationError);  // folds 1 missing everywhere
    EXPECT_THROW(aggregate_and_merge(recs, 2), ValidationError);       // fold 1 expected but absent

    auto dup = recs;
    dup.push_back(recs.front());
    EXPECT_THROW(aggregate_and_merge(dup), ValidationError);
}

// ---------------------------------------------------------------- selection

TEST(Selection, WinnerOracleAndTies) {
    auto table = aggregate_and_merge(table_records(
        three, 0,
        {{"mu_risk", {3, 1, 2}}, {"mu_risk_r2", {0.2, 0.9, 0.5}}, {"policy_risk", {1, 1, 4}}, {"test_pehe", {3, 1, 2}}}));
    EXPECT_EQ(select_winner(table, "mu_risk", 0), three[1]);
    EXPECT_EQ(select_winner(table, "mu_risk_r2", 0), three[1]);
    EXPECT_EQ(select_winner(table, "policy_risk", 0), std::min(three[0], three[1]));
    EXPECT_EQ(oracle_select(table, "test_pehe", 0), three[1]);
    EXPECT_DOUBLE_EQ(*best_row(table, "test_pehe", 0).cell("test_pehe").value, 1.0);
    EXPECT_THROW(oracle_select(table, "mu_risk", 0), ValidationError);
}

TEST(Selection, TieBreaksLexicographically) {
    const std::vector<std::string> ids = {"TL/tree/b", "SL/tree/a"};
    auto table = aggregate_and_merge(table_records(ids, 0, {{"mu_risk", {1, 1}}, {"test_pehe", {1, 1}}}));
    EXPECT_EQ(select_winner(table, "mu_risk", 0), "SL/tree/a");
}

TEST(Selection, UnavailableSkippedAndAllUnavailableRejected) {
    const double na = std::nan("");
    auto table = aggregate_and_merge(table_records(three, 0, {{"mu_risk", {na, 5, 7}}, {"mu_risk_r2", {na, na, na}}, {"test_pehe", {1, 2, 3}}}));
    EXPECT_EQ(select_winner(table, "mu_risk", 0), three[1]);
    EXPECT_THROW(select_winner(table, "mu_risk_r2", 0), ValidationError);
}

TEST(Selection, OracleMayDifferAcrossTestMetrics) {
    auto table = aggregate_and_merge(table_records(three, 0, {{"test_pehe", {1, 2, 3}}, {"test_e_ate", {3, 2, 1}}}));
    EXPECT_EQ(oracle_select(table, "test_pehe", 0), three[0]);
    EXPECT_EQ(oracle_select(table, "test_e_ate", 0), three[2]);
}

TEST(Regret, Examples) {
    auto table = aggregate_and_merge(table_records(three, 0, {{"mu_risk", {5, 9, 1}}, {"test_pehe", {2, 1, 3}}}));
    EXPECT_DOUBLE_EQ(regret(table, "mu_risk", "test_pehe", 0), 2.0);
    EXPECT_DOUBLE_EQ(regret(table, "test_pehe", "test_pehe", 0), 0.0);
}

// ---------------------------------------------------------------- rank correlation

TEST(RankCorrelation, HandValues) {
    auto corr = [&](std::vector<double> v, std::vector<double> t) {
        auto table = aggregate_and_merge(table_records(three, 0, {{"mu_risk", v}, {"test_pehe", t}}));
        return rank_correlation(table, "mu_risk", "test_pehe", 0);
    };
    EXPECT_NEAR(*corr({1, 2, 3}, {10, 20, 30}).value, 1.0, 1e-12);
    EXPECT_NEAR(*corr({1, 2, 3}, {30, 20, 10}).value, -1.0, 1e-12);
    EXPECT_NEAR(*corr({1, 2, 3}, {20, 10, 30}).value, 0.5, 1e-12);
    EXPECT_FALSE(corr({1, 1, 1}, {1, 2, 3}).available());
    EXPECT_FALSE(corr({1, std::nan(""), 3}, {1, 2, 3}).available());

    auto table = aggregate_and_merge(table_records(three, 0, {{"test_pehe", {0.3, 0.1, 0.2}}}));
    EXPECT_EQ(*rank_correlation(table, "test_pehe", "test_pehe", 0).value, 1.0);
}

TEST(Summarize, Examples) {
    auto a = summarize({1, 1, 1, 1});
    EXPECT_DOUBLE_EQ(a.mean, 1.0);
    EXPECT_DOUBLE_EQ(*a.std_err, 0.0);
    auto b = summarize({0, 2});
    EXPECT_DOUBLE_EQ(b.mean, 1.0);
    EXPECT_NEAR(*b.std_err, 1.0, 1e-12);
    auto c = summarize({3, 0.5, 7, 2});
    auto d = summarize({7, 2, 3, 0.5});
    EXPECT_DOUBLE_EQ(c.mean, d.mean);
    EXPECT_DOUBLE_EQ(*c.std_err, *d.std_err);
    EXPECT_FALSE(summarize({4}).std_err.has_value());
    EXPECT_THROW(summarize({}), ValidationError);
    EXPECT_EQ(b.format(), "1±1");
}

// ---------------------------------------------------------------- truth-metric correlation

TEST(TruthCorrelation, ScopesAndDegenerateColumns) {
    std::vector<std::string> ids = {cid("SL", Family::l2_linear, 0.1), cid("SL", Family::l2_linear, 1),
                                    cid("SL", Family::l2_linear, 10), cid("TL", Family::l2_linear, 0.1),
                                    cid("TL", Family::l2_linear, 1),  cid("TL", Family::l2_linear, 10)};
    std::vector<MetricRecord> recs;
    for (int it = 0; it < 3; ++it) {
        auto r = table_records(ids, it,
                               {{"test_pehe", {1, 2, 3, 4.0 + it, 5, 6}},
                                {"test_e_ate", {1, 2, 3, 4.0 + it, 5, 6}},
                                {"test_policy_risk", {0.5, 0.5, 0.5, 0.5, 0.5, 0.5}},
                                {"test_e_att", {6, 1, 2, 5, 3, 4}}});
        recs.insert(recs.end(), r.begin(), r.end());
    }
    const auto table = aggregate_and_merge(recs);
    const auto same = truth_metric_correlation(table, Scope::all, "", "test_pehe", "test_e_ate");
    ASSERT_TRUE(same);
    EXPECT_DOUBLE_EQ(same->mean, 1.0);
    EXPECT_DOUBLE_EQ(*same->std_err, 0.0);
    EXPECT_FALSE(truth_metric_correlation(table, Scope::all, "", "test_pehe", "test_policy_risk"));

    // ALL pools every row regardless of estimator
    const auto all = truth_metric_correlation(table, Scope::all, "", "test_pehe", "test_e_att");
    std::vector<double> pooled;
    for (int it = 0; it < 3; ++it) pooled.push_back(*rank_correlation(table, "test_pehe", "test_e_att", it).value);
    EXPECT_DOUBLE_EQ(all->mean, summarize(pooled).mean);
    EXPECT_TRUE(truth_metric_correlation(table, Scope::per_estimator, "TL", "test_pehe", "test_e_att"));
    EXPECT_THROW(truth_metric_correlation(table, Scope::per_estimator, "XL", "test_pehe", "test_e_att"), ValidationError);

    const auto t = truth_correlation_table(table);
    EXPECT_EQ(t.row_names, (std::vector<std::string>{"SL", "TL", "l2_linear", "ALL"}));
    EXPECT_EQ(t.columns.size(), 6u);
}

// ---------------------------------------------------------------- defaults vs oracle

TEST(DefaultsVsOracle, PointsAndDominance) {
    const std::vector<std::string> ids = {cid("SL", Family::l2_linear, 0.1), cid("SL", Family::l2_linear, 1),
                                          cid("TL", Family::l2_linear, 1)};
    std::vector<MetricRecord> recs;
    for (int it = 0; it < 2; ++it) {
        auto r = table_records(ids, it, {{"test_pehe", {1.0 + it, 2, 3}}, {"test_e_ate", {0.5, 0.2 + it, 0.7}}});
        recs.insert(recs.end(), r.begin(), r.end());
    }
    const auto table = aggregate_and_merge(recs);
    const auto pts = defaults_vs_oracle(table, "test_e_ate", "test_pehe");
    ASSERT_EQ(pts.size(), 4u);  // 2 estimators x 1 family x {default, oracle}
    EXPECT_EQ(pts[0].estimator, "SL");
    EXPECT_EQ(pts[0].kind, "default");
    EXPECT_EQ(pts[1].kind, "oracle");
    EXPECT_LE(pts[1].x->mean, pts[0].x->mean);
    EXPECT_LE(pts[1].y->mean, pts[0].y->mean);
    EXPECT_DOUBLE_EQ(pts[1].y->mean, 1.5);  // pehe oracle picks alpha 0.1: (1 + 2) / 2
    // single-point grid: default and oracle coincide
    EXPECT_DOUBLE_EQ(pts[2].x->mean, pts[3].x->mean);
    EXPECT_DOUBLE_EQ(pts[2].y->mean, pts[3].y->mean);

    auto no_default = aggregate_and_merge(table_records({cid("SL", Family::l2_linear, 0.1)}, 0, {{"test_pehe", {1}}}));
    EXPECT_THROW(defaults_vs_oracle(no_default, "test_pehe", "test_pehe"), ValidationError);
    EXPECT_NE(points_to_csv(pts, "test_e_ate", "test_pehe").find("SL,l2_linear,oracle"), std::string::npos);
}

// ---------------------------------------------------------------- full-run invariants

TEST(FullRun, RegretOracleAndMonotonicity) {
    auto r = small_run(3, 3);
    for (double alpha : {0.01, 1.0, 20.0}) {
        auto l2 = default_spec(Family::l2_linear);
        l2.params["alpha"] = alpha;
        for (auto e : {Estimator::SL, Estimator::TL, Estimator::DR}) r.cfg.candidates.push_back({e, l2});
    }
    auto tree = default_spec(Family::tree);
    tree.params["max_depth"] = 3.0;
    r.cfg.candidates.push_back({Estimator::XL, tree});
    r.cfg.val_metrics = {"mu_risk", "mu_risk_r2", "tau_match_pehe/k3", "tau_rscore/dt", "policy_risk"};
    r.cfg.test_metrics = {"test_pehe", "test_e_ate"};
    const auto res = run_grid(r.plan, [&](std::size_t) { return r.data; }, r.cfg);
    ASSERT_FALSE(res.partial());
    const auto table = aggregate_and_merge(res.records, 3);

    for (const auto& v : table.val_metrics)
        for (const auto& t : table.test_metrics)
            for (int it : table.iterations()) EXPECT_GE(regret(table, v, t, it), 0.0);

    const auto winners = winners_table(table);
    for (const auto& t : table.test_metrics) {
        const auto& oracle = winners.at("oracle", t);
        ASSERT_TRUE(oracle);
        for (const auto& v : table.val_metrics) EXPECT_LE(oracle->mean, winners.at(v, t)->mean + 1e-12) << v << " " << t;
    }

    // a narrower candidate set never has a better oracle
    RowFilter sl_only = [](const ResultRow& row) { return row.key.estimator == "SL"; };
    for (const auto& t : table.test_metrics)
        for (int it : table.iterations())
            EXPECT_LE(*best_row(table, t, it).cell(t).value, *best_row(table, t, it, sl_only).cell(t).value);

    const auto csv = regret_table(table).to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "val_metric,test_pehe,test_e_ate");
    EXPECT_EQ(rank_correlation_table(table).row_names.size(), table.val_metrics.size());
}

// ---------------------------------------------------------------- config

TEST(Config, ParsesAndExpands) {
    const auto cfg = parse_config(nlohmann::json::parse(R"({
        "schema_version": 1,
        "data": {"generator": {"name": "sinusoidal_demo", "n_control": 50, "n_treated": 50, "seed": 1}},
        "estimators": ["SL", "TL"],
        "learners": {"l2_linear": {"alpha": [0.1, 1]}, "tree": "default"},
        "val_metrics": ["mu_risk", "tau_rscore/kr"],
        "test_metrics": "all",
        "seed": 9,
        "n_estimators": 50,
        "aux": {"grids": {"kernel_ridge": {"kernel": ["poly"], "degree": [2]}}}
    })"));
    EXPECT_EQ(cfg.run.candidates.size(), 2u * (2u * 2u + 1u));
    EXPECT_EQ(cfg.run.test_metrics.size(), 4u);
    EXPECT_EQ(cfg.run.seed, 9u);
    EXPECT_EQ(cfg.run.fit.n_estimators, 50);
    EXPECT_EQ(cfg.run.validation.aux.grids.at(Family::kernel_ridge).size(), 2u);
    EXPECT_EQ(cfg.data.load(0).n(), 100);
    EXPECT_EQ(cfg.hash().size(), 16u);
}

TEST(Config, RejectsBadInput) {
    auto expect_error = [](const std::string& text, const std::string& needle) {
        try {
            parse_config(nlohmann::json::parse(text));
            ADD_FAILURE() << "accepted: " << text;
        } catch (const ValidationError& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    const std::string ok_learners = R"("learners": {"l2_linear": "default"})";
    expect_error(R"({"schema_version": 1, "estimators": ["causal_forest"], )" + ok_learners + "}", "estimator out of scope");
    expect_error(R"({"schema_version": 1, "estimators": ["SL"], )" + ok_learners + R"(, "val_metrics": ["bogus"]})",
                 "unknown metric");
    expect_error(R"({"schema_version": 1, "estimators": ["SL"], )" + ok_learners + R"(, "val_metrics": ["test_pehe"]})",
                 "test metric");
    expect_error(R"({"schema_version": 1, "estimators": ["SL"], )" + ok_learners + R"(, "colour": 1})", "unknown key");
    expect_error(R"({"schema_version": 2, "estimators": ["SL"], )" + ok_learners + "}", "schema_version");
    expect_error(R"({"schema_version": 1, "estimators": ["SL"], "learners": {"tree": {"max_depth": [3.5]}}})",
                 "outside the grid");
    expect_error(R"({"schema_version": 1, "estimators": ["SL"], "learners": {"svm": "all"}})", "unknown learner family");
    expect_error(R"({"schema_version": 1, "estimators": "SL", )" + ok_learners + "}", "estimators");
}
