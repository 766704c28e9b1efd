#pragma once

#include "cmsel/harness/results.hpp"

#include <cstdio>
#include <functional>

namespace cmsel {

using RowFilter = std::function<bool(const ResultRow&)>;

/// Best available row of `iter` under the metric's orientation. Rows whose
/// fits failed on this iteration are excluded; ties go to the smaller id.
inline const ResultRow& best_row(const ResultsTable& table, const std::string& metric, int iter,
                                 const RowFilter& filter = {}) {
    require(table.has_column(metric), "results have no column '" + metric + "'");
    const bool higher = higher_is_better(metric);
    const ResultRow* best = nullptr;
    for (const auto* r : table.rows_of(iter)) {
        if (r->failed || (filter && !filter(*r))) continue;
        const auto& s = r->cell(metric);
        if (!s.available()) continue;
        if (best == nullptr) {
            best = r;
            continue;
        }
        const double v = *s.value, b = *best->cell(metric).value;
        if ((higher ? v > b : v < b) || (v == b && r->candidate < best->candidate)) best = r;
    }
    if (best == nullptr)
        throw ValidationError("no available '" + metric + "' value in iteration " + std::to_string(iter));
    return *best;
}

inline std::string select_winner(const ResultsTable& table, const std::string& val_metric, int iter) {
    return best_row(table, val_metric, iter).candidate;
}

inline std::string oracle_select(const ResultsTable& table, const std::string& test_metric, int iter) {
    require(metric_info(test_metric).kind == MetricKind::test, "'" + test_metric + "' is not a test metric");
    return best_row(table, test_metric, iter).candidate;
}

namespace detail {

inline const ResultRow& row_of(const ResultsTable& table, const std::string& candidate, int iter) {
    for (const auto* r : table.rows_of(iter))
        if (r->candidate == candidate) return *r;
    throw ValidationError("no row for " + candidate + " in iteration " + std::to_string(iter));
}

}  // namespace detail

/// |test(oracle pick) - test(validation pick)|. Only candidates with a test
/// value compete, so the oracle ranges over the same set the metric does.
inline double regret(const ResultsTable& table, const std::string& val_metric, const std::string& test_metric, int iter) {
    auto has_test = [&](const ResultRow& r) { return r.cell(test_metric).available(); };
    const auto& oracle = best_row(table, test_metric, iter, has_test);
    const auto& pick = best_row(table, val_metric, iter, has_test);
    return std::abs(*oracle.cell(test_metric).value - *pick.cell(test_metric).value);
}

/// Spearman correlation between two columns over the candidates of one
/// iteration where both are available. Raw orientations are kept.
inline Score rank_correlation(const ResultsTable& table, const std::string& a, const std::string& b, int iter,
                              const RowFilter& filter = {}) {
    require(table.has_column(a), "results have no column '" + a + "'");
    require(table.has_column(b), "results have no column '" + b + "'");
    std::vector<double> xa, xb;
    for (const auto* r : table.rows_of(iter)) {
        if (r->failed || (filter && !filter(*r))) continue;
        const auto &sa = r->cell(a), &sb = r->cell(b);
        if (sa.available() && sb.available()) {
            xa.push_back(*sa.value);
            xb.push_back(*sb.value);
        }
    }
    if (xa.size() < 3)
        return Score::unavailable("only " + std::to_string(xa.size()) + " paired candidates (need 3)");
    const auto rho = spearman(xa, xb);
    if (!rho) return Score::unavailable("zero variance in a ranking");
    return Score::of(*rho);
}

struct SummaryCell {
    double mean = 0.0;
    std::optional<double> std_err;
    std::size_t n = 0;

    [[nodiscard]] std::string format() const {
        char buf[64];
        if (std_err)
            std::snprintf(buf, sizeof buf, "%.4g±%.4g", mean, *std_err);
        else
            std::snprintf(buf, sizeof buf, "%.4g", mean);
        return buf;
    }
};

/// Mean and standard error (sample sd with n-1, over sqrt(n)).
inline SummaryCell summarize(const std::vector<double>& values) {
    require(!values.empty(), "summarize: no values");
    SummaryCell c;
    c.n = values.size();
    c.mean = mean(values);
    if (c.n >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - c.mean) * (v - c.mean);
        c.std_err = std::sqrt(ss / static_cast<double>(c.n - 1)) / std::sqrt(static_cast<double>(c.n));
    }
    return c;
}

// ---------------------------------------------------------------- summary tables

/// Rows x columns of optional summary cells, with warnings collected while
/// building it. Empty cells are written as "NA".
struct SummaryTable {
    std::string row_header;
    std::vector<std::string> columns;
    std::vector<std::string> row_names;
    std::vector<std::vector<std::optional<SummaryCell>>> cells;
    std::vector<std::string> warnings;

    [[nodiscard]] const std::optional<SummaryCell>& at(const std::string& row, const std::string& col) const {
        const auto r = std::find(row_names.begin(), row_names.end(), row) - row_names.begin();
        const auto c = std::find(columns.begin(), columns.end(), col) - columns.begin();
        require(r < static_cast<long>(row_names.size()) && c < static_cast<long>(columns.size()),
                "summary has no cell (" + row + ", " + col + ")");
        return cells[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }

    [[nodiscard]] std::string to_csv() const {
        std::vector<std::string> header = {row_header};
        header.insert(header.end(), columns.begin(), columns.end());
        std::string out = csv::join(header) + "\n";
        for (std::size_t r = 0; r < row_names.size(); ++r) {
            std::vector<std::string> f = {row_names[r]};
            for (const auto& c : cells[r]) f.push_back(c ? c->format() : "NA");
            out += csv::join(f) + "\n";
        }
        return out;
    }
};

namespace detail {

/// Summarize `value(iter)` over iterations; failures become warnings.
template <typename ValueFn>
std::optional<SummaryCell> over_iterations(const ResultsTable& table, ValueFn&& value, const std::string& what,
                                           std::vector<std::string>& warnings) {
    std::vector<double> vals;
    for (int it : table.iterations()) {
        try {
            if (auto v = value(it)) vals.push_back(*v);
            else
                warnings.push_back(what + " iter " + std::to_string(it) + ": unavailable");
        } catch (const ValidationError& e) {
            warnings.push_back(what + " iter " + std::to_string(it) + ": " + e.what());
        }
    }
    if (vals.empty()) return std::nullopt;
    return summarize(vals);
}

inline std::vector<std::string> audit_failures(const ResultsTable& table) {
    std::vector<std::string> out;
    for (const auto& r : table.rows)
        if (r.failed) out.push_back(r.candidate + " excluded from iteration " + std::to_string(r.iter) + " (failed fit)");
    return out;
}

}  // namespace detail

/// Test value of each validation metric's per-iteration winner, summarized
/// across iterations; the last row holds the oracle's.
inline SummaryTable winners_table(const ResultsTable& table) {
    SummaryTable out;
    out.row_header = "selection";
    out.columns = table.test_metrics;
    out.warnings = detail::audit_failures(table);
    auto row_for = [&](const std::string& selector) {
        out.row_names.push_back(selector == "" ? "oracle" : selector);
        std::vector<std::optional<SummaryCell>> row;
        for (const auto& test : table.test_metrics) {
            row.push_back(detail::over_iterations(
                table,
                [&](int it) -> std::optional<double> {
                    auto has_test = [&](const ResultRow& r) { return r.cell(test).available(); };
                    return *best_row(table, selector.empty() ? test : selector, it, has_test).cell(test).value;
                },
                (selector.empty() ? "oracle" : selector) + " -> " + test, out.warnings));
        }
        out.cells.push_back(std::move(row));
    };
    for (const auto& v : table.val_metrics) row_for(v);
    row_for("");
    return out;
}

inline SummaryTable regret_table(const ResultsTable& table) {
    SummaryTable out;
    out.row_header = "val_metric";
    out.columns = table.test_metrics;
    out.warnings = detail::audit_failures(table);
    for (const auto& v : table.val_metrics) {
        out.row_names.push_back(v);
        std::vector<std::optional<SummaryCell>> row;
        for (const auto& t : table.test_metrics)
            row.push_back(detail::over_iterations(
                table, [&](int it) -> std::optional<double> { return regret(table, v, t, it); }, v + " regret " + t,
                out.warnings));
        out.cells.push_back(std::move(row));
    }
    return out;
}

inline SummaryTable rank_correlation_table(const ResultsTable& table) {
    SummaryTable out;
    out.row_header = "val_metric";
    out.columns = table.test_metrics;
    out.warnings = detail::audit_failures(table);
    for (const auto& v : table.val_metrics) {
        out.row_names.push_back(v);
        std::vector<std::optional<SummaryCell>> row;
        for (const auto& t : table.test_metrics)
            row.push_back(detail::over_iterations(
                table, [&](int it) { return rank_correlation(table, v, t, it).value; }, v + " rank-corr " + t,
                out.warnings));
        out.cells.push_back(std::move(row));
    }
    return out;
}

/// Per-iteration oracle picks, long format: one row per (test metric,
/// iteration) plus a summary row per metric.
inline std::string oracle_csv(const ResultsTable& table, std::vector<std::string>* warnings = nullptr) {
    std::string out = csv::join({"test_metric", "iter", "candidate", "value"}) + "\n";
    for (const auto& t : table.test_metrics) {
        std::vector<double> vals;
        for (int it : table.iterations()) {
            try {
                const auto& r = best_row(table, t, it);
                vals.push_back(*r.cell(t).value);
                out += csv::join({t, std::to_string(it), r.candidate, format_double(vals.back())}) + "\n";
            } catch (const ValidationError& e) {
                if (warnings) warnings->push_back(t + " iter " + std::to_string(it) + ": " + e.what());
                out += csv::join({t, std::to_string(it), "", "NA"}) + "\n";
            }
        }
        out += csv::join({t, "all", "", vals.empty() ? "NA" : summarize(vals).format()}) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------- truth-metric correlation

enum class Scope { per_estimator, per_learner, all };

inline Scope parse_scope(std::string_view s) {
    if (s == "per-estimator") return Scope::per_estimator;
    if (s == "per-learner") return Scope::per_learner;
    if (s == "all") return Scope::all;
    throw ValidationError("unknown scope '" + std::string(s) + "' (per-estimator, per-learner, all)");
}

/// Spearman between two test columns over the in-scope candidates of each
/// iteration, summarized across iterations. `group` selects the estimator or
/// learner family; it is ignored for Scope::all.
inline std::optional<SummaryCell> truth_metric_correlation(const ResultsTable& table, Scope scope,
                                                           const std::string& group, const std::string& a,
                                                           const std::string& b, std::vector<std::string>* warnings = nullptr) {
    RowFilter in_scope = [&](const ResultRow& r) {
        return scope == Scope::all || (scope == Scope::per_estimator ? r.key.estimator : r.key.family) == group;
    };
    std::vector<double> vals;
    for (int it : table.iterations()) {
        std::size_t n = 0;
        for (const auto* r : table.rows_of(it)) n += in_scope(*r) ? 1 : 0;
        if (n < 3)
            throw ValidationError("scope '" + (scope == Scope::all ? std::string("ALL") : group) + "' has " +
                                  std::to_string(n) + " candidates in iteration " + std::to_string(it) + " (need 3)");
        const auto s = rank_correlation(table, a, b, it, in_scope);
        if (s.available())
            vals.push_back(*s.value);
        else if (warnings)
            warnings->push_back(group + " " + a + "~" + b + " iter " + std::to_string(it) + ": " + s.note);
    }
    if (vals.empty()) return std::nullopt;
    return summarize(vals);
}

/// Rows: every estimator, every learner family, then ALL. Columns: every
/// unordered pair of test metrics.
inline SummaryTable truth_correlation_table(const ResultsTable& table) {
    SummaryTable out;
    out.row_header = "scope";
    out.warnings = detail::audit_failures(table);
    std::vector<std::pair<std::string, std::string>> pairs;
    for (std::size_t i = 0; i < table.test_metrics.size(); ++i)
        for (std::size_t j = i + 1; j < table.test_metrics.size(); ++j) {
            pairs.emplace_back(table.test_metrics[i], table.test_metrics[j]);
            out.columns.push_back(table.test_metrics[i] + "~" + table.test_metrics[j]);
        }
    std::vector<std::pair<Scope, std::string>> groups;
    std::set<std::string> ests, fams;
    for (const auto& r : table.rows) {
        ests.insert(r.key.estimator);
        fams.insert(r.key.family);
    }
    for (const auto& e : ests) groups.emplace_back(Scope::per_estimator, e);
    for (const auto& f : fams) groups.emplace_back(Scope::per_learner, f);
    groups.emplace_back(Scope::all, "ALL");
    for (const auto& [scope, g] : groups) {
        out.row_names.push_back(g);
        std::vector<std::optional<SummaryCell>> row;
        for (const auto& [a, b] : pairs) {
            try {
                row.push_back(truth_metric_correlation(table, scope, g, a, b, &out.warnings));
            } catch (const ValidationError& e) {
                out.warnings.push_back(e.what());
                row.push_back(std::nullopt);
            }
        }
        out.cells.push_back(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------- defaults vs oracle

struct DefaultsOraclePoint {
    std::string estimator;
    std::string family;
    std::string kind;  // "default" or "oracle"
    std::optional<SummaryCell> x;
    std::optional<SummaryCell> y;
};

/// For every (estimator, family) present: the default-hyperparameter
/// candidate's test scores, and the oracle over that pair's hyperparameters
/// only (each axis minimized separately), summarized across iterations.
inline std::vector<DefaultsOraclePoint> defaults_vs_oracle(const ResultsTable& table, const std::string& metric_x,
                                                           const std::string& metric_y,
                                                           std::vector<std::string>* warnings = nullptr) {
    for (const auto& m : {metric_x, metric_y})
        require(metric_info(m).kind == MetricKind::test && table.has_column(m), "'" + m + "' is not a test column");
    std::set<std::pair<std::string, std::string>> combos;
    for (const auto& r : table.rows) combos.emplace(r.key.estimator, r.key.family);
    std::vector<std::string> sink;
    auto& warn = warnings ? *warnings : sink;
    std::vector<DefaultsOraclePoint> out;
    for (const auto& [est, fam] : combos) {
        const auto default_id = est + "/" + fam + "/" + default_spec(parse_family(fam)).hyper_id();
        bool has_default = false;
        for (const auto& r : table.rows) has_default |= r.candidate == default_id;
        if (!has_default) throw ValidationError("no default-hyperparameter candidate for " + est + "/" + fam);
        RowFilter in_combo = [&](const ResultRow& r) { return r.key.estimator == est && r.key.family == fam; };
        auto default_value = [&](const std::string& m) {
            return detail::over_iterations(
                table,
                [&](int it) -> std::optional<double> {
                    const auto& r = detail::row_of(table, default_id, it);
                    if (r.failed) throw ValidationError(default_id + " failed");
                    return r.cell(m).value;
                },
                default_id + " " + m, warn);
        };
        auto oracle_value = [&](const std::string& m) {
            return detail::over_iterations(
                table, [&](int it) -> std::optional<double> { return *best_row(table, m, it, in_combo).cell(m).value; },
                est + "/" + fam + " oracle " + m, warn);
        };
        out.push_back({est, fam, "default", default_value(metric_x), default_value(metric_y)});
        out.push_back({est, fam, "oracle", oracle_value(metric_x), oracle_value(metric_y)});
    }
    return out;
}

inline std::string points_to_csv(const std::vector<DefaultsOraclePoint>& points, const std::string& metric_x,
                                  const std::string& metric_y) {
    std::string out = csv::join({"estimator", "learner", "point", metric_x, metric_x + "_se", metric_y, metric_y + "_se"}) + "\n";
    auto cell = [](const std::optional<SummaryCell>& c, bool se) -> std::string {
        if (!c) return "NA";
        if (se) return c->std_err ? format_double(*c->std_err) : "NA";
        return format_double(c->mean);
    };
    for (const auto& p : points)
        out += csv::join({p.estimator, p.family, p.kind, cell(p.x, false), cell(p.x, true), cell(p.y, false), cell(p.y, true)}) + "\n";
    return out;
}

}  // namespace cmsel
