#pragma once

#include "cmsel/demo/demo.hpp"
#include "cmsel/harness/analysis.hpp"
#include "cmsel/harness/config.hpp"
#include "cmsel/harness/results.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

namespace cmsel::cli {

inline constexpr const char* version = "0.1.0";

enum ExitCode : int { ok = 0, io_error = 1, validation_error = 2, partial_run = 3, demo_failed = 4 };

struct SplitArgs {
    std::string data, manifest, config, schema, out;
    std::optional<int> iters;
    int folds = 5;
    double test_frac = 0.2;
    std::uint64_t seed = 0;
};

struct RunArgs {
    std::string plan, config, out;
    std::size_t jobs = 1;
};

struct AnalyzeArgs {
    std::string records, mode, out;
    std::vector<std::string> metrics;  // metric pair for defaults-vs-oracle
    std::optional<int> folds;
};

struct DemoArgs {
    std::uint64_t seed = demo_default_seed;
    std::string out;
};

inline const std::vector<std::string>& analyze_modes() {
    static const std::vector<std::string> modes = {"winners", "oracle", "regret", "rank-corr", "truth-corr",
                                                   "defaults-vs-oracle"};
    return modes;
}

namespace detail {

inline std::string plan_summary(const SplitPlan& plan) {
    return std::to_string(plan.iterations.size()) + " iterations × " + std::to_string(plan.n_folds) + " folds";
}

inline CsvSchema read_schema(const std::string& path) {
    try {
        return CsvSchema::from_json(nlohmann::json::parse(csv::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

/// Treatment vectors, one per iteration, from whichever source was given.
inline std::vector<Vector> split_treatments(const SplitArgs& a) {
    const int given = (a.data.empty() ? 0 : 1) + (a.manifest.empty() ? 0 : 1) + (a.config.empty() ? 0 : 1);
    require(given == 1, "split: give exactly one of --data, --manifest, --config");
    DataSpec spec;
    if (!a.config.empty()) {
        spec = load_config(a.config).data;
        require(spec.files || spec.generator, "split: config '" + a.config + "' declares no data source");
    } else {
        DataSource src;
        src.files = a.data.empty() ? read_manifest(a.manifest) : std::vector<std::filesystem::path>{a.data};
        if (!a.schema.empty()) src.schema = read_schema(a.schema);
        spec.files = src;
    }
    const auto n_sources = static_cast<int>(spec.n_sources());
    int iters = a.iters.value_or(n_sources > 1 ? n_sources : 10);
    require(iters >= 1, "--iters must be >= 1, got " + std::to_string(iters));
    if (n_sources > 1)
        require(iters == n_sources, "--iters " + std::to_string(iters) + " does not match the " +
                                        std::to_string(n_sources) + " files listed in the manifest");
    std::vector<Vector> out;
    for (int i = 0; i < iters; ++i)
        out.push_back(n_sources > 1 || i == 0 ? spec.load(static_cast<std::size_t>(i)).t : out.front());
    return out;
}

inline std::string run_manifest(const Config& cfg, const RunArgs& a, const SplitPlan& plan, const RunResult& res,
                                double wall_seconds) {
    nlohmann::json m;
    m["config"] = a.config;
    m["config_hash"] = cfg.hash();
    m["plan"] = a.plan;
    m["versions"] = {{"cmsel", version},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}};
    m["jobs"] = a.jobs;
    m["wall_time_seconds"] = wall_seconds;
    m["n_candidates"] = cfg.run.candidates.size();
    m["n_iterations"] = plan.iterations.size();
    m["n_folds"] = plan.n_folds;
    m["n_records"] = res.records.size();
    m["partial"] = res.partial();
    m["failures"] = res.failures;
    return m.dump(2) + "\n";
}

inline void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
    for (const auto& w : warnings) err << "warning: " << w << '\n';
}

}  // namespace detail

inline int cmd_split(const SplitArgs& a, std::ostream& out) {
    if (!(a.test_frac > 0.0 && a.test_frac < 1.0))
        throw ValidationError("--test-frac must lie in (0, 1), got " + format_double(a.test_frac));
    require(a.folds >= 2, "--folds must be >= 2, got " + std::to_string(a.folds));
    const auto plan = build_split_plan(detail::split_treatments(a), a.test_frac, a.folds, a.seed);
    csv::write_atomic(a.out, serialize(plan));
    out << detail::plan_summary(plan) << " -> " << a.out << '\n';
    return ok;
}

inline int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
    const auto start = std::chrono::steady_clock::now();
    Config cfg = load_config(a.config);
    require(cfg.data.files || cfg.data.generator, "config '" + a.config + "' declares no data source");
    const auto plan = parse_split_plan(csv::read_file(a.plan));
    require(a.jobs >= 1, "--jobs must be >= 1");
    cfg.run.jobs = a.jobs;
    std::mutex log_mutex;
    cfg.run.log = [&](const std::string& line) {
        std::lock_guard lock(log_mutex);
        err << line << '\n';
    };
    const auto res = run_grid(plan, [&](std::size_t i) { return cfg.data.load(i); }, cfg.run);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::filesystem::path dir(a.out);
    csv::write_atomic(dir / "records.csv", records_to_csv(res.records));
    csv::write_atomic(dir / "run_manifest.json", detail::run_manifest(cfg, a, plan, res, wall));
    out << res.records.size() << " records, " << cfg.run.candidates.size() << " candidates, "
        << detail::plan_summary(plan) << " -> " << (dir / "records.csv").string() << '\n';
    if (res.partial()) {
        for (const auto& f : res.failures) err << "failed: " << f << '\n';
        err << res.failures.size() << " fit(s) failed; records written\n";
        return partial_run;
    }
    return ok;
}

inline int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
    const auto& modes = analyze_modes();
    require(std::find(modes.begin(), modes.end(), a.mode) != modes.end(), "--mode: unknown mode '" + a.mode + "'");
    const auto table = aggregate_and_merge(parse_records(csv::read_file(a.records), a.records), a.folds);
    std::string text;
    std::vector<std::string> warnings;
    if (a.mode == "winners" || a.mode == "regret" || a.mode == "rank-corr" || a.mode == "truth-corr") {
        const SummaryTable s = a.mode == "winners"   ? winners_table(table)
                               : a.mode == "regret"  ? regret_table(table)
                               : a.mode == "rank-corr" ? rank_correlation_table(table)
                                                       : truth_correlation_table(table);
        text = s.to_csv();
        warnings = s.warnings;
    } else if (a.mode == "oracle") {
        text = oracle_csv(table, &warnings);
    } else {
        const std::vector<std::string> pair =
            a.metrics.empty() ? std::vector<std::string>{"test_pehe", "test_e_ate"} : a.metrics;
        require(pair.size() == 2, "--metrics takes exactly two metric names");
        text = points_to_csv(defaults_vs_oracle(table, pair[0], pair[1], &warnings), pair[0], pair[1]);
    }
    csv::write_atomic(a.out, text);
    detail::print_warnings(warnings, err);
    out << a.mode << ": " << table.rows.size() << " rows over " << table.iterations().size() << " iterations -> "
        << a.out << '\n';
    return ok;
}

inline int cmd_demo(const DemoArgs& a, std::ostream& out) {
    const auto rep = run_demo(a.seed);
    write_demo(rep, a.out);
    char line[160];
    for (const auto& c : rep.cases) {
        std::snprintf(line, sizeof line, "%s  mse %.4f  pehe %.4f  sum %.4f  (%s)\n", c.name.c_str(), c.mse, c.pehe,
                      c.mse + c.pehe, c.description.c_str());
        out << line;
    }
    auto mark = [](bool b) { return b ? "holds" : "VIOLATED"; };
    out << "MSE(case1) < MSE(case2): " << mark(rep.mse_prefers_case1()) << '\n'
        << "PEHE(case2) < PEHE(case1): " << mark(rep.pehe_prefers_case2()) << '\n'
        << "MSE(case3) largest: " << mark(rep.case3_worst_mse()) << '\n'
        << "case2 smallest MSE+PEHE: " << mark(rep.case2_smaller_sum()) << '\n';
    return rep.orderings_hold() ? ok : demo_failed;
}

/// Parse `args` (without the program name) and dispatch. Errors are reported
/// on `err` and mapped to exit codes.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Counterfactual model selection: split, run, analyze, demo"};
    app.set_version_flag("--version", version);
    app.require_subcommand(1);

    SplitArgs split;
    auto* s = app.add_subcommand("split", "Build and store train/test/fold splits");
    auto* s_data = s->add_option("--data", split.data, "Dataset CSV (iterations reshuffle it)");
    auto* s_manifest = s->add_option("--manifest", split.manifest, "File listing one dataset CSV per iteration");
    auto* s_config = s->add_option("--config", split.config, "Run config; its data section is used");
    s_data->excludes(s_manifest, s_config);
    s_manifest->excludes(s_config);
    s->add_option("--schema", split.schema, "JSON column binding (default: detect from header)");
    s->add_option("--iters", split.iters, "Iterations (default: manifest length, else 10)");
    s->add_option("--folds", split.folds, "Stratified validation folds")->capture_default_str();
    s->add_option("--test-frac", split.test_frac, "Test fraction in (0, 1)")->capture_default_str();
    s->add_option("--seed", split.seed, "Base seed")->capture_default_str();
    s->add_option("--out", split.out, "Plan file to write")->required();

    RunArgs run;
    if (const char* env = std::getenv("CMSEL_JOBS")) {
        try {
            run.jobs = static_cast<std::size_t>(std::max(1L, std::stol(env)));
        } catch (const std::exception&) {
            err << "CMSEL_JOBS: not a number, using 1\n";
        }
    }
    auto* r = app.add_subcommand("run", "Fit and score every candidate over a split plan");
    r->add_option("--plan", run.plan, "Split plan file")->required();
    r->add_option("--config", run.config, "Run config (JSON)")->required();
    r->add_option("--out", run.out, "Output directory")->required();
    r->add_option("--jobs", run.jobs, "Worker threads (default $CMSEL_JOBS or 1)")->capture_default_str();

    AnalyzeArgs analyze;
    auto* an = app.add_subcommand("analyze", "Summarize a records file");
    an->add_option("--records", analyze.records, "records.csv from run")->required();
    an->add_option("--mode", analyze.mode, "Query")->required()->check(CLI::IsMember(analyze_modes()));
    an->add_option("--out", analyze.out, "CSV to write")->required();
    an->add_option("--metrics", analyze.metrics, "Test metric pair for defaults-vs-oracle")->expected(2)->delimiter(',');
    an->add_option("--folds", analyze.folds, "Expected fold count (default: inferred)");

    DemoArgs demo;
    auto* d = app.add_subcommand("demo", "Run the MSE-vs-PEHE demonstration");
    d->add_option("--seed", demo.seed, "Seed")->capture_default_str();
    d->add_option("--out", demo.out, "Output directory")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::CallForVersion&) {
        out << version << '\n';
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return validation_error;
    }

    try {
        if (s->parsed()) return cmd_split(split, out);
        if (r->parsed()) return cmd_run(run, out, err);
        if (an->parsed()) return cmd_analyze(analyze, out, err);
        return cmd_demo(demo, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return validation_error;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return io_error;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return io_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return io_error;
    }
}

}  // namespace cmsel::cli
