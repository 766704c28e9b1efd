#pragma once

#include "cmsel/core/parallel.hpp"
#include "cmsel/data/split_plan.hpp"
#include "cmsel/harness/records.hpp"
#include "cmsel/metrics/validation.hpp"

#include <functional>
#include <mutex>

namespace cmsel {

struct RunConfig {
    std::vector<CandidateSpec> candidates;
    std::vector<std::string> val_metrics;
    std::vector<std::string> test_metrics;
    std::uint64_t seed = 0;
    FitOptions fit;
    int n_crossfit = 5;
    ValidationOptions validation;
    std::size_t jobs = 1;

    /// Called before every candidate fit; throwing from it simulates a fit
    /// failure. `fold` is empty for the full-train fit.
    std::function<void(const CandidateSpec&, int iter, std::optional<int> fold)> before_fit;
    // Inspection hooks; both may be called concurrently from worker threads.
    std::function<void(const CandidateSpec&, int iter, std::optional<int> fold, const FittedCandidate&)> after_fit;
    std::function<void(int iter, int fold, const ValidationContext&)> on_context;
    std::function<void(const std::string&)> log;
};

struct RunResult {
    std::vector<MetricRecord> records;  // sorted by key
    std::vector<std::string> failures;  // one line per failed fit

    [[nodiscard]] bool partial() const { return !failures.empty(); }
};

/// Names are checked against the registry before any fitting starts.
inline void check_run_config(const RunConfig& cfg) {
    require(!cfg.candidates.empty(), "no candidates configured");
    require(!cfg.val_metrics.empty() || !cfg.test_metrics.empty(), "no metrics configured");
    for (const auto& m : cfg.val_metrics)
        require(metric_info(m).kind == MetricKind::validation, "'" + m + "' is not a validation metric");
    for (const auto& m : cfg.test_metrics)
        require(metric_info(m).kind == MetricKind::test, "'" + m + "' is not a test metric");
    for (const auto& c : cfg.candidates) validate_spec(c.learner);
    require(cfg.jobs >= 1, "jobs must be >= 1");
}

/// Fit every candidate on every fold of every iteration and score it, then
/// refit on the full training split and score the test split. Records depend
/// only on the plan, data, config and seed, never on `jobs`.
inline RunResult run_grid(const SplitPlan& plan, const std::function<Dataset(std::size_t)>& load, const RunConfig& cfg) {
    check_run_config(cfg);
    validate_plan(plan);
    const std::size_t n_iter = plan.iterations.size();
    const std::size_t n_folds = static_cast<std::size_t>(plan.n_folds);

    std::vector<Dataset> data(n_iter);
    for (std::size_t i = 0; i < n_iter; ++i) {
        data[i] = load(i);
        require(data[i].n() == plan.iterations[i].n_rows,
                "iteration " + std::to_string(i) + ": dataset has " + std::to_string(data[i].n()) +
                    " rows but the plan expects " + std::to_string(plan.iterations[i].n_rows));
    }

    std::vector<ValidationContext> contexts(n_iter * n_folds);
    if (!cfg.val_metrics.empty()) {
        parallel_for(contexts.size(), cfg.jobs, [&](std::size_t slot) {
            const std::size_t it = slot / n_folds, f = slot % n_folds;
            contexts[slot] = build_validation_context(data[it].subset(plan.iterations[it].folds[f].val_idx),
                                                      cfg.val_metrics, derive_seed(cfg.seed, "validation", it, f),
                                                      cfg.validation);
            if (cfg.on_context) cfg.on_context(static_cast<int>(it), static_cast<int>(f), contexts[slot]);
        });
    }

    struct Unit {
        std::vector<MetricRecord> records;
        std::vector<std::string> failures;
    };
    const std::size_t n_units = cfg.candidates.size() * n_iter;
    std::vector<Unit> units(n_units);
    std::mutex log_mu;

    parallel_for(n_units, cfg.jobs, [&](std::size_t slot) {
        const auto& cand = cfg.candidates[slot / n_iter];
        const int it = static_cast<int>(slot % n_iter);
        const auto id = cand.id();
        const auto& ds = data[static_cast<std::size_t>(it)];
        const auto& split = plan.iterations[static_cast<std::size_t>(it)];
        Unit& unit = units[slot];

        auto fit = [&](const IndexList& rows, std::optional<int> fold) {
            if (cfg.before_fit) cfg.before_fit(cand, it, fold);
            EstimatorOptions eo;
            eo.fit = cfg.fit;
            eo.n_crossfit = cfg.n_crossfit;
            eo.seed = derive_seed(cfg.seed, "candidate", id, it, fold ? static_cast<std::uint64_t>(*fold) : 1000000ULL);
            auto fc = fit_candidate(cand, ds.subset(rows), eo);
            if (cfg.after_fit) cfg.after_fit(cand, it, fold, fc);
            return fc;
        };
        auto fail_all = [&](const std::vector<std::string>& metrics, std::optional<int> fold, const std::string& why) {
            unit.failures.push_back(id + " iter " + std::to_string(it) +
                                    (fold ? " fold " + std::to_string(*fold) : " full-train") + ": " + why);
            for (const auto& m : metrics)
                unit.records.push_back({id, it, fold, m, Score::unavailable(std::string(failure_prefix) + why)});
        };

        if (!cfg.val_metrics.empty()) {
            for (std::size_t f = 0; f < n_folds; ++f) {
                const int fold = static_cast<int>(f);
                try {
                    const auto fc = fit(split.folds[f].fit_idx, fold);
                    for (auto& [m, s] : score_validation(fc, contexts[static_cast<std::size_t>(it) * n_folds + f]))
                        unit.records.push_back({id, it, fold, m, std::move(s)});
                } catch (const std::exception& e) {
                    fail_all(cfg.val_metrics, fold, e.what());
                }
            }
        }
        if (!cfg.test_metrics.empty()) {
            try {
                const auto fc = fit(split.train_idx, std::nullopt);
                const auto test = ds.subset(split.test_idx);
                const Vector tau = fc.predict_cate(test.x);
                for (const auto& m : cfg.test_metrics) unit.records.push_back({id, it, std::nullopt, m, test_metric(m, tau, test)});
            } catch (const std::exception& e) {
                fail_all(cfg.test_metrics, std::nullopt, e.what());
            }
        }
        if (cfg.log) {
            std::lock_guard lock(log_mu);
            cfg.log(id + " iter " + std::to_string(it) + (unit.failures.empty() ? " done" : " done with failures"));
        }
    });

    RunResult out;
    for (auto& u : units) {
        std::move(u.records.begin(), u.records.end(), std::back_inserter(out.records));
        std::move(u.failures.begin(), u.failures.end(), std::back_inserter(out.failures));
    }
    sort_records(out.records);
    return out;
}

}  // namespace cmsel
