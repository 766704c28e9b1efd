#pragma once

#include "cmsel/core/csv.hpp"
#include "cmsel/core/stats.hpp"
#include "cmsel/metrics/score.hpp"

#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace cmsel {

/// One metric value for one candidate on one iteration; `fold` is set for
/// validation metrics and empty for test metrics.
struct MetricRecord {
    std::string candidate;
    int iter = 0;
    std::optional<int> fold;
    std::string metric;
    Score score;

    [[nodiscard]] auto key() const { return std::make_tuple(candidate, iter, fold.value_or(-1), metric); }
    bool operator==(const MetricRecord&) const = default;
};

inline bool record_less(const MetricRecord& a, const MetricRecord& b) { return a.key() < b.key(); }

inline void sort_records(std::vector<MetricRecord>& records) {
    std::sort(records.begin(), records.end(), record_less);
}

/// Note prefix marking a value lost to a failed fit rather than to a metric
/// being undefined for the candidate.
inline constexpr std::string_view failure_prefix = "failed: ";

inline bool is_failure(const Score& s) { return !s.available() && s.note.rfind(failure_prefix, 0) == 0; }

inline const std::vector<std::string>& record_columns() {
    static const std::vector<std::string> cols = {"candidate", "iter", "fold", "metric", "value", "note"};
    return cols;
}

inline std::string records_to_csv(const std::vector<MetricRecord>& records) {
    std::string out = csv::join(record_columns()) + "\n";
    for (const auto& r : records) {
        out += csv::join({r.candidate, std::to_string(r.iter), r.fold ? std::to_string(*r.fold) : "", r.metric,
                          r.score.value ? format_double(*r.score.value) : "", r.score.note});
        out += "\n";
    }
    return out;
}

inline std::vector<MetricRecord> parse_records(const std::string& text, const std::string& origin = "<records>") {
    const auto table = csv::parse(text, origin);
    std::vector<std::size_t> idx;
    for (const auto& name : record_columns()) {
        auto it = std::find(table.header.begin(), table.header.end(), name);
        if (it == table.header.end()) throw ValidationError(origin + ": missing column '" + name + "'");
        idx.push_back(static_cast<std::size_t>(it - table.header.begin()));
    }
    std::vector<MetricRecord> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto where = origin + ": row " + std::to_string(r + 2);
        auto integer = [&](const std::string& s, const char* col) {
            const auto v = parse_double(s);
            if (!v || *v != std::floor(*v) || *v < 0) throw ValidationError(where + ": bad " + col + " '" + s + "'");
            return static_cast<int>(*v);
        };
        MetricRecord rec;
        rec.candidate = row[idx[0]];
        rec.iter = integer(row[idx[1]], "iter");
        if (!row[idx[2]].empty()) rec.fold = integer(row[idx[2]], "fold");
        rec.metric = row[idx[3]];
        if (!row[idx[4]].empty()) {
            const auto v = parse_double(row[idx[4]]);
            if (!v) throw ValidationError(where + ": non-numeric value '" + row[idx[4]] + "'");
            rec.score.value = *v;
        }
        rec.score.note = row[idx[5]];
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace cmsel
