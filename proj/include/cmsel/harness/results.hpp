#pragma once

#include "cmsel/estimators/candidate.hpp"
#include "cmsel/harness/records.hpp"

#include <map>
#include <set>

namespace cmsel {

struct CandidateKey {
    std::string estimator;
    std::string family;
    std::string hyper_id;
};

/// Splits "estimator/family/hyper_id".
inline CandidateKey split_candidate_id(const std::string& id) {
    const auto a = id.find('/');
    const auto b = a == std::string::npos ? a : id.find('/', a + 1);
    if (b == std::string::npos) throw ValidationError("malformed candidate id '" + id + "'");
    return {id.substr(0, a), id.substr(a + 1, b - a - 1), id.substr(b + 1)};
}

struct ResultRow {
    std::string candidate;
    CandidateKey key;
    int iter = 0;
    std::map<std::string, Score> cells;
    bool failed = false;  // some fit for this candidate and iteration failed

    [[nodiscard]] const Score& cell(const std::string& metric) const {
        auto it = cells.find(metric);
        if (it == cells.end()) throw ValidationError("results have no column '" + metric + "'");
        return it->second;
    }
};

/// One row per (candidate, iteration): validation metrics averaged over the
/// folds, test metrics as recorded. Rows are ordered by (iteration, candidate).
struct ResultsTable {
    std::vector<std::string> val_metrics;
    std::vector<std::string> test_metrics;
    std::vector<ResultRow> rows;
    int n_folds = 0;

    [[nodiscard]] std::vector<int> iterations() const {
        std::set<int> s;
        for (const auto& r : rows) s.insert(r.iter);
        return {s.begin(), s.end()};
    }

    [[nodiscard]] std::vector<const ResultRow*> rows_of(int iter) const {
        std::vector<const ResultRow*> out;
        for (const auto& r : rows)
            if (r.iter == iter) out.push_back(&r);
        return out;
    }

    [[nodiscard]] bool has_column(const std::string& m) const {
        return std::find(val_metrics.begin(), val_metrics.end(), m) != val_metrics.end() ||
               std::find(test_metrics.begin(), test_metrics.end(), m) != test_metrics.end();
    }
};

/// Fold averaging and test-score join. An unavailable fold makes the whole
/// cell unavailable. Every (candidate, iteration) must carry every metric
/// seen anywhere in the records, with all folds present for validation metrics.
/// Without `expected_folds` the fold count is the largest fold index seen + 1.
inline ResultsTable aggregate_and_merge(const std::vector<MetricRecord>& records,
                                        std::optional<int> expected_folds = std::nullopt) {
    require(!records.empty(), "no records to aggregate");
    std::set<std::string> val_set, test_set, candidates;
    std::set<int> iters;
    int n_folds = 0;
    std::map<std::tuple<std::string, int, std::string>, std::map<int, Score>> folds;
    std::map<std::tuple<std::string, int, std::string>, Score> tests;
    for (const auto& r : records) {
        const auto& info = metric_info(r.metric);
        require((info.kind == MetricKind::validation) == r.fold.has_value(),
                "record " + r.candidate + " iter " + std::to_string(r.iter) + " metric " + r.metric +
                    (r.fold ? ": test metric carries a fold" : ": validation metric lacks a fold"));
        candidates.insert(r.candidate);
        iters.insert(r.iter);
        const auto key = std::make_tuple(r.candidate, r.iter, r.metric);
        if (r.fold) {
            val_set.insert(r.metric);
            n_folds = std::max(n_folds, *r.fold + 1);
            require(folds[key].emplace(*r.fold, r.score).second, "duplicate record " + r.candidate + " iter " +
                                                                     std::to_string(r.iter) + " fold " +
                                                                     std::to_string(*r.fold) + " metric " + r.metric);
        } else {
            test_set.insert(r.metric);
            require(tests.emplace(key, r.score).second,
                    "duplicate record " + r.candidate + " iter " + std::to_string(r.iter) + " metric " + r.metric);
        }
    }

    if (expected_folds) {
        require(n_folds <= *expected_folds, "records carry fold " + std::to_string(n_folds - 1) + " but only " +
                                                std::to_string(*expected_folds) + " folds are expected");
        if (!val_set.empty()) n_folds = *expected_folds;
    }
    ResultsTable table;
    table.n_folds = n_folds;
    // registry order keeps columns stable across runs
    for (const auto& m : metric_registry()) {
        if (val_set.count(m.name)) table.val_metrics.push_back(m.name);
        if (test_set.count(m.name)) table.test_metrics.push_back(m.name);
    }
    for (int it : iters)
        for (const auto& cand : candidates) {
            ResultRow row;
            row.candidate = cand;
            row.key = split_candidate_id(cand);
            row.iter = it;
            const auto where = cand + " iter " + std::to_string(it);
            for (const auto& m : table.val_metrics) {
                auto fit = folds.find({cand, it, m});
                if (fit == folds.end()) throw ValidationError("incomplete records: " + where + " has no '" + m + "'");
                double sum = 0.0;
                std::optional<std::string> missing;
                for (int f = 0; f < n_folds; ++f) {
                    auto s = fit->second.find(f);
                    if (s == fit->second.end())
                        throw ValidationError("incomplete records: " + where + " metric '" + m + "' lacks fold " +
                                              std::to_string(f));
                    if (is_failure(s->second)) row.failed = true;
                    if (!s->second.available()) {
                        if (!missing) missing = "fold " + std::to_string(f) + ": " + s->second.note;
                    } else {
                        sum += *s->second.value;
                    }
                }
                row.cells[m] = missing ? Score::unavailable(*missing) : Score::of(sum / n_folds);
            }
            for (const auto& m : table.test_metrics) {
                auto t = tests.find({cand, it, m});
                if (t == tests.end()) throw ValidationError("incomplete records: " + where + " has no '" + m + "'");
                if (is_failure(t->second)) row.failed = true;
                row.cells[m] = t->second;
            }
            table.rows.push_back(std::move(row));
        }
    return table;
}

inline std::string results_to_csv(const ResultsTable& table) {
    std::vector<std::string> header = {"estimator", "learner", "hyper_id", "iter", "candidate"};
    for (const auto& m : table.val_metrics) header.push_back(m);
    for (const auto& m : table.test_metrics) header.push_back(m);
    std::string out = csv::join(header) + "\n";
    for (const auto& r : table.rows) {
        std::vector<std::string> f = {r.key.estimator, r.key.family, r.key.hyper_id, std::to_string(r.iter), r.candidate};
        for (std::size_t c = 5; c < header.size(); ++c) {
            const auto& s = r.cells.at(header[c]);
            f.push_back(s.value ? format_double(*s.value) : "");
        }
        out += csv::join(f) + "\n";
    }
    return out;
}

}  // namespace cmsel
