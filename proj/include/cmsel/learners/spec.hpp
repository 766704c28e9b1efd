#pragma once

#include "cmsel/core/stats.hpp"
#include "cmsel/core/types.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cmsel {

enum class Family { l1_linear, l2_linear, kernel_ridge, tree, random_forest, extra_trees, gbt_light, gbt_cat };

inline constexpr std::array<Family, 8> all_families = {Family::l1_linear,     Family::l2_linear,   Family::kernel_ridge,
                                                       Family::tree,          Family::random_forest, Family::extra_trees,
                                                       Family::gbt_light,     Family::gbt_cat};

inline std::string_view to_string(Family f) {
    switch (f) {
        case Family::l1_linear: return "l1_linear";
        case Family::l2_linear: return "l2_linear";
        case Family::kernel_ridge: return "kernel_ridge";
        case Family::tree: return "tree";
        case Family::random_forest: return "random_forest";
        case Family::extra_trees: return "extra_trees";
        case Family::gbt_light: return "gbt_light";
        case Family::gbt_cat: return "gbt_cat";
    }
    return "?";
}

inline Family parse_family(std::string_view s) {
    for (Family f : all_families)
        if (to_string(f) == s) return f;
    throw ValidationError("unknown learner family '" + std::string(s) + "'");
}

using ParamValue = std::variant<double, std::string>;

inline std::string format_param(const ParamValue& v) {
    if (const auto* d = std::get_if<double>(&v)) return format_double(*d);
    return std::get<std::string>(v);
}

/// One point of a base learner's hyperparameter space.
struct LearnerSpec {
    Family family = Family::l2_linear;
    std::map<std::string, ParamValue> params;

    [[nodiscard]] double num(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end()) throw ValidationError(std::string(to_string(family)) + ": missing parameter '" + name + "'");
        if (const auto* d = std::get_if<double>(&it->second)) return *d;
        throw ValidationError(std::string(to_string(family)) + ": parameter '" + name + "' is not numeric");
    }

    [[nodiscard]] std::string str(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end()) throw ValidationError(std::string(to_string(family)) + ": missing parameter '" + name + "'");
        if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
        throw ValidationError(std::string(to_string(family)) + ": parameter '" + name + "' is not a string");
    }

    /// Sorted name=value pairs joined by ';' (std::map keeps names sorted).
    [[nodiscard]] std::string hyper_id() const {
        std::string out;
        for (const auto& [k, v] : params) {
            if (!out.empty()) out.push_back(';');
            out += k + "=" + format_param(v);
        }
        return out;
    }

    /// family + hyper_id.
    [[nodiscard]] std::string serialize() const { return std::string(to_string(family)) + ":" + hyper_id(); }

    bool operator==(const LearnerSpec&) const = default;
};

/// One grid axis: its allowed values and the default-marked value.
struct GridAxis {
    std::string name;
    std::vector<ParamValue> values;
    ParamValue default_value;
};

namespace detail {

inline std::vector<ParamValue> nums(std::initializer_list<double> v) { return {v.begin(), v.end()}; }

inline const std::vector<double> tree_depths = {2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20};
inline const std::vector<double> tree_leaves = {0.01, 0.02, 0.03, 0.04, 0.05, 1, 2, 3, 4, 5, 6, 7, 8, 9};

}  // namespace detail

/// Hyperparameter search space per family; '*' defaults carried as default_value.
inline std::vector<GridAxis> grid_axes(Family f) {
    using detail::nums;
    switch (f) {
        case Family::l1_linear:
        case Family::l2_linear:
            return {{"alpha", nums({0.001, 0.01, 0.1, 0.5, 1, 2, 10, 20}), 1.0},
                    {"max_iter", nums({1000, 10000}), 1000.0}};
        case Family::tree:
        case Family::random_forest:
        case Family::extra_trees:
            return {{"max_depth", {detail::tree_depths.begin(), detail::tree_depths.end()}, 20.0},
                    {"min_samples_leaf", {detail::tree_leaves.begin(), detail::tree_leaves.end()}, 1.0}};
        case Family::kernel_ridge:
            return {{"alpha", nums({0.001, 0.01, 0.1, 1}), 1.0},
                    {"gamma", nums({0.01, 0.1, 1, 10, 100}), 1.0},
                    {"kernel", {std::string("rbf"), std::string("poly")}, std::string("poly")},
                    {"degree", nums({2, 3, 4}), 3.0}};
        case Family::gbt_cat:
            return {{"depth", nums({5, 6, 7, 8, 9, 10}), 10.0}, {"l2_leaf_reg", nums({1, 3, 10, 100}), 1.0}};
        case Family::gbt_light:
            return {{"max_depth", nums({5, 6, 7, 8, 9, 10}), 10.0}, {"reg_lambda", nums({0, 0.1, 1, 5, 10}), 0.1}};
    }
    throw ValidationError("unknown learner family");
}

/// Per-axis value subsets; axes not named keep their full range.
using GridRestriction = std::map<std::string, std::vector<ParamValue>>;

/// rbf ignores `degree`, so rbf specs carry the default degree only.
inline void canonicalize(LearnerSpec& spec) {
    if (spec.family == Family::kernel_ridge) {
        auto k = spec.params.find("kernel");
        if (k != spec.params.end() && std::get_if<std::string>(&k->second) && std::get<std::string>(k->second) == "rbf")
            spec.params["degree"] = 3.0;
    }
}

/// Throws unless every parameter name and value belongs to the family's grid domain.
inline void validate_spec(const LearnerSpec& spec) {
    const auto axes = grid_axes(spec.family);
    for (const auto& [name, value] : spec.params) {
        auto axis = std::find_if(axes.begin(), axes.end(), [&](const GridAxis& a) { return a.name == name; });
        if (axis == axes.end())
            throw ValidationError(std::string(to_string(spec.family)) + ": unknown parameter '" + name + "'");
        if (std::find(axis->values.begin(), axis->values.end(), value) == axis->values.end())
            throw ValidationError(std::string(to_string(spec.family)) + ": value " + format_param(value) +
                                  " outside the grid of '" + name + "'");
    }
    for (const auto& axis : axes)
        if (!spec.params.contains(axis.name))
            throw ValidationError(std::string(to_string(spec.family)) + ": missing parameter '" + axis.name + "'");
}

inline LearnerSpec default_spec(Family f) {
    LearnerSpec s{f, {}};
    for (const auto& axis : grid_axes(f)) s.params[axis.name] = axis.default_value;
    canonicalize(s);
    return s;
}

/// Cartesian product of the family's grid (optionally restricted), first axis
/// slowest, duplicates removed after canonicalization.
inline std::vector<LearnerSpec> expand_grid(Family f, const GridRestriction& restriction = {}) {
    auto axes = grid_axes(f);
    for (const auto& [name, values] : restriction) {
        auto axis = std::find_if(axes.begin(), axes.end(), [&](const GridAxis& a) { return a.name == name; });
        if (axis == axes.end())
            throw ValidationError(std::string(to_string(f)) + ": unknown parameter '" + name + "' in grid restriction");
        for (const auto& v : values)
            if (std::find(axis->values.begin(), axis->values.end(), v) == axis->values.end())
                throw ValidationError(std::string(to_string(f)) + ": value " + format_param(v) + " outside the grid of '" +
                                      name + "'");
        require(!values.empty(), std::string(to_string(f)) + ": empty restriction for '" + name + "'");
        axis->values = values;
    }
    std::vector<LearnerSpec> out;
    std::vector<std::size_t> pos(axes.size(), 0);
    for (;;) {
        LearnerSpec s{f, {}};
        for (std::size_t a = 0; a < axes.size(); ++a) s.params[axes[a].name] = axes[a].values[pos[a]];
        canonicalize(s);
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
        std::size_t a = axes.size();
        while (a > 0) {
            --a;
            if (++pos[a] < axes[a].values.size()) break;
            pos[a] = 0;
            if (a == 0) return out;
        }
        if (axes.empty()) return out;
    }
}

inline bool is_default(const LearnerSpec& spec) { return spec == default_spec(spec.family); }

}  // namespace cmsel
