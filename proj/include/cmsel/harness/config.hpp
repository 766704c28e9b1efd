#pragma once

#include "cmsel/data/csv_loader.hpp"
#include "cmsel/data/generators.hpp"
#include "cmsel/harness/run.hpp"

#include <json.hpp>

#include <cstdio>
#include <set>

namespace cmsel {

inline constexpr int config_schema_version = 1;

/// Synthetic data named in a config instead of a file.
struct GeneratorSpec {
    std::string name;  // sinusoidal_demo | partially_linear | constant_effect_linear
    nlohmann::json params;

    [[nodiscard]] Dataset generate() const {
        auto num = [&](const char* key, double fallback) {
            return params.contains(key) ? params.at(key).get<double>() : fallback;
        };
        auto count = [&](const char* key, double fallback) { return static_cast<Index>(num(key, fallback)); };
        const auto seed = static_cast<std::uint64_t>(num("seed", 0));
        if (name == "sinusoidal_demo") {
            Band band;
            if (params.contains("band")) {
                const auto b = params.at("band").get<std::vector<double>>();
                require(b.size() == 2, "generator band must be [lo, hi]");
                band = {b[0], b[1]};
            }
            return gen_sinusoidal_demo(count("n_control", 200), count("n_treated", 200), band, num("noise_sd", 0.3), seed);
        }
        if (name == "partially_linear")
            return gen_partially_linear(count("n", 1000), count("d", 5), num("theta", 2.0), num("confounding", 1.0),
                                        num("noise_sd", 1.0), seed);
        if (name == "constant_effect_linear")
            return gen_constant_effect_linear(count("n", 1000), count("d", 5), num("theta", 2.0), num("confounding", 1.0), seed);
        throw ValidationError("unknown generator '" + name + "'");
    }
};

/// Where a run's rows come from: CSV file(s) or a generator.
struct DataSpec {
    std::optional<DataSource> files;
    std::optional<GeneratorSpec> generator;

    [[nodiscard]] Dataset load(std::size_t iteration) const {
        if (generator) return generator->generate();
        require(files.has_value(), "config declares no data source");
        return files->load(iteration);
    }

    /// Number of distinct per-iteration datasets (1 when iterations reshuffle one file).
    [[nodiscard]] std::size_t n_sources() const { return files ? files->files.size() : 1; }
};

struct Config {
    DataSpec data;
    RunConfig run;
    nlohmann::json raw;

    /// FNV-1a of the canonical JSON text.
    [[nodiscard]] std::string hash() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(raw.dump())));
        return buf;
    }
};

namespace detail {

inline void only_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    require(j.is_object(), where + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, _] : j.items())
        if (!ok.count(k)) throw ValidationError(where + ": unknown key '" + k + "'");
}

inline GridRestriction parse_restriction(Family f, const nlohmann::json& j, const std::string& where) {
    require(j.is_object(), where + " must be an object of parameter -> list of values");
    GridRestriction r;
    for (const auto& [name, values] : j.items()) {
        require(values.is_array(), where + "." + name + " must be a list");
        std::vector<ParamValue> vs;
        for (const auto& v : values) {
            if (v.is_number()) vs.emplace_back(v.get<double>());
            else if (v.is_string()) vs.emplace_back(v.get<std::string>());
            else throw ValidationError(where + "." + name + ": values must be numbers or strings");
        }
        r[name] = std::move(vs);
    }
    expand_grid(f, r);  // rejects names and values outside the family's grid
    return r;
}

inline std::vector<std::string> metric_list(const nlohmann::json& j, MetricKind kind, const char* key) {
    if (j.is_string() && j.get<std::string>() == "all") return metric_names(kind);
    require(j.is_array(), std::string(key) + " must be a list of metric names or \"all\"");
    std::vector<std::string> out;
    for (const auto& m : j) {
        const auto name = m.get<std::string>();
        if (metric_info(name).kind != kind)
            throw ValidationError(std::string(key) + ": '" + name + "' is a " +
                                  (kind == MetricKind::test ? "validation" : "test") + " metric");
        out.push_back(name);
    }
    return out;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

/// Parse and fully validate a run config; every name is checked here so a
/// bad config fails before any model is fitted. `base_dir` resolves relative
/// data paths.
inline Config parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    try {
        detail::only_keys(j, "config",
                          {"schema_version", "data", "estimators", "learners", "val_metrics", "test_metrics", "seed",
                           "n_estimators", "n_crossfit", "aux", "standardize_matching"});
        require(j.contains("schema_version"), "config: missing 'schema_version'");
        require(j.at("schema_version").get<int>() == config_schema_version,
                "config: unsupported schema_version " + j.at("schema_version").dump() + " (expected " +
                    std::to_string(config_schema_version) + ")");
        Config cfg;
        cfg.raw = j;

        if (j.contains("data")) {
            const auto& d = j.at("data");
            detail::only_keys(d, "data", {"csv", "manifest", "generator", "schema"});
            require(d.contains("csv") + d.contains("manifest") + d.contains("generator") == 1,
                    "data: give exactly one of 'csv', 'manifest', 'generator'");
            auto resolve = [&](const std::string& p) {
                std::filesystem::path path(p);
                return path.is_relative() ? base_dir / path : path;
            };
            if (d.contains("generator")) {
                const auto& g = d.at("generator");
                require(g.is_object() && g.contains("name"), "data.generator needs a 'name'");
                GeneratorSpec spec{g.at("name").get<std::string>(), g};
                spec.params.erase("name");
                cfg.data.generator = spec;
            } else {
                DataSource src;
                if (d.contains("schema")) src.schema = CsvSchema::from_json(d.at("schema"));
                if (d.contains("csv")) src.files = {resolve(d.at("csv").get<std::string>())};
                else src.files = read_manifest(resolve(d.at("manifest").get<std::string>()));
                cfg.data.files = src;
            }
        }

        require(j.contains("estimators") && j.at("estimators").is_array(), "config: 'estimators' must be a list");
        std::vector<Estimator> estimators;
        for (const auto& e : j.at("estimators")) estimators.push_back(parse_estimator(e.get<std::string>()));
        require(!estimators.empty(), "config: 'estimators' is empty");

        require(j.contains("learners") && j.at("learners").is_object(), "config: 'learners' must be an object");
        std::vector<LearnerSpec> learners;
        for (const auto& [name, sel] : j.at("learners").items()) {
            const Family f = parse_family(name);
            if (sel.is_string()) {
                const auto s = sel.get<std::string>();
                if (s == "default") learners.push_back(default_spec(f));
                else if (s == "all") for (auto& spec : expand_grid(f)) learners.push_back(std::move(spec));
                else throw ValidationError("learners." + name + ": expected \"all\", \"default\" or an object");
            } else {
                for (auto& spec : expand_grid(f, detail::parse_restriction(f, sel, "learners." + name)))
                    learners.push_back(std::move(spec));
            }
        }
        require(!learners.empty(), "config: 'learners' is empty");
        for (Estimator e : estimators)
            for (const auto& l : learners) cfg.run.candidates.push_back({e, l});

        cfg.run.val_metrics = j.contains("val_metrics")
                                  ? detail::metric_list(j.at("val_metrics"), MetricKind::validation, "val_metrics")
                                  : metric_names(MetricKind::validation);
        cfg.run.test_metrics = j.contains("test_metrics")
                                   ? detail::metric_list(j.at("test_metrics"), MetricKind::test, "test_metrics")
                                   : metric_names(MetricKind::test);
        cfg.run.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
        cfg.run.fit.n_estimators = detail::get_or<int>(j, "n_estimators", cfg.run.fit.n_estimators);
        require(cfg.run.fit.n_estimators >= 1, "config: n_estimators must be >= 1");
        cfg.run.n_crossfit = detail::get_or<int>(j, "n_crossfit", 5);
        require(cfg.run.n_crossfit >= 2, "config: n_crossfit must be >= 2");
        cfg.run.validation.standardize_matching = detail::get_or<bool>(j, "standardize_matching", true);

        auto& aux = cfg.run.validation.aux;
        aux.fit = cfg.run.fit;
        if (j.contains("aux")) {
            const auto& a = j.at("aux");
            detail::only_keys(a, "aux", {"n_folds", "n_estimators", "grids"});
            aux.n_folds = detail::get_or<int>(a, "n_folds", 5);
            require(aux.n_folds >= 2, "aux.n_folds must be >= 2");
            aux.fit.n_estimators = detail::get_or<int>(a, "n_estimators", aux.fit.n_estimators);
            if (a.contains("grids")) {
                require(a.at("grids").is_object(), "aux.grids must be an object");
                for (const auto& [name, sel] : a.at("grids").items()) {
                    const Family f = parse_family(name);
                    aux.grids[f] = detail::parse_restriction(f, sel, "aux.grids." + name);
                }
            }
        }
        check_run_config(cfg.run);
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
}

inline Config load_config(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(csv::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path());
}

}  // namespace cmsel
