#pragma once

#include "cmsel/core/types.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cmsel {

/// A metric value, or the reason it is unavailable. Unavailable is never
/// silently replaced by a number downstream.
struct Score {
    std::optional<double> value;
    std::string note;

    static Score of(double v, std::string note = {}) { return {v, std::move(note)}; }
    static Score unavailable(std::string why) { return {std::nullopt, std::move(why)}; }
    [[nodiscard]] bool available() const { return value.has_value(); }

    bool operator==(const Score&) const = default;
};

enum class Orientation { lower_better, higher_better };
enum class MetricKind { validation, test };

struct MetricInfo {
    std::string name;
    MetricKind kind;
    Orientation orientation;
};

/// Every metric the harness can emit, with its orientation.
inline const std::vector<MetricInfo>& metric_registry() {
    static const std::vector<MetricInfo> reg = [] {
        std::vector<MetricInfo> r;
        const auto val = MetricKind::validation;
        const auto lo = Orientation::lower_better;
        const auto hi = Orientation::higher_better;
        r.push_back({"mu_risk", val, lo});
        r.push_back({"mu_risk_r2", val, hi});
        for (const char* flavor : {"pehe", "ate"})
            for (const char* est : {"SL", "TL"})
                for (const char* fam : {"DT", "GBT", "KR"})
                    r.push_back({std::string("tau_plugin_") + flavor + "/" + est + "-" + fam, val, lo});
        for (const char* flavor : {"pehe", "ate"})
            for (const char* k : {"k1", "k3", "k5"}) r.push_back({std::string("tau_match_") + flavor + "/" + k, val, lo});
        for (const char* fam : {"dt", "gbt", "kr"}) r.push_back({std::string("tau_rscore/") + fam, val, hi});
        r.push_back({"policy_risk", val, lo});
        for (const char* name : {"test_pehe", "test_e_ate", "test_e_att", "test_policy_risk"})
            r.push_back({name, MetricKind::test, lo});
        return r;
    }();
    return reg;
}

inline const MetricInfo* find_metric(std::string_view name) {
    const auto& reg = metric_registry();
    auto it = std::find_if(reg.begin(), reg.end(), [&](const MetricInfo& m) { return m.name == name; });
    return it == reg.end() ? nullptr : &*it;
}

inline const MetricInfo& metric_info(std::string_view name) {
    const auto* m = find_metric(name);
    if (m == nullptr) throw ValidationError("unknown metric '" + std::string(name) + "'");
    return *m;
}

inline bool higher_is_better(std::string_view name) {
    return metric_info(name).orientation == Orientation::higher_better;
}

inline std::vector<std::string> metric_names(MetricKind kind) {
    std::vector<std::string> out;
    for (const auto& m : metric_registry())
        if (m.kind == kind) out.push_back(m.name);
    return out;
}

}  // namespace cmsel
