#pragma once

#include "cmsel/core/csv.hpp"
#include "cmsel/core/stats.hpp"
#include "cmsel/data/dataset.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cmsel {

/// Binds CSV header names to dataset roles. When `x` is empty, every column
/// whose name starts with `x_prefix` and is not bound to another role is a
/// covariate, in file order.
struct CsvSchema {
    std::vector<std::string> x;
    std::string x_prefix = "x";
    std::string t = "t";
    std::string yf = "yf";
    std::optional<std::string> ycf;
    std::optional<std::string> mu0;
    std::optional<std::string> mu1;
    std::optional<std::string> exp_flag;
    OutcomeKind outcome_kind = OutcomeKind::continuous;

    /// Default IHDP-style binding: t, yf, ycf, mu0, mu1, x1..xd.
    static CsvSchema ihdp() {
        CsvSchema s;
        s.ycf = "ycf";
        s.mu0 = "mu0";
        s.mu1 = "mu1";
        return s;
    }

    static CsvSchema from_json(const nlohmann::json& j) {
        CsvSchema s;
        if (j.contains("x")) s.x = j.at("x").get<std::vector<std::string>>();
        if (j.contains("x_prefix")) s.x_prefix = j.at("x_prefix").get<std::string>();
        if (j.contains("t")) s.t = j.at("t").get<std::string>();
        if (j.contains("yf")) s.yf = j.at("yf").get<std::string>();
        for (auto [key, slot] : {std::pair{"ycf", &s.ycf}, {"mu0", &s.mu0}, {"mu1", &s.mu1}, {"exp_flag", &s.exp_flag}})
            if (j.contains(key) && !j.at(key).is_null()) *slot = j.at(key).get<std::string>();
        if (j.contains("outcome_kind")) {
            const auto k = j.at("outcome_kind").get<std::string>();
            require(k == "continuous" || k == "binary", "schema: outcome_kind must be 'continuous' or 'binary'");
            s.outcome_kind = k == "binary" ? OutcomeKind::binary : OutcomeKind::continuous;
        }
        return s;
    }
};

namespace detail {

inline Vector numeric_column(const csv::Table& table, std::size_t col, const std::string& origin) {
    Vector v(static_cast<Index>(table.rows.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& cell = table.rows[r][col];
        auto parsed = parse_double(cell);
        if (!parsed)
            throw IoError(origin + ": non-numeric value '" + cell + "' at row " + std::to_string(r + 1) + ", column '" +
                          table.header[col] + "'");
        v[static_cast<Index>(r)] = *parsed;
    }
    return v;
}

}  // namespace detail

inline Dataset dataset_from_table(const csv::Table& table, const CsvSchema& schema, const std::string& origin) {
    auto col = [&](const std::string& name) -> std::size_t {
        auto c = table.column(name);
        if (!c) throw ValidationError(origin + ": missing required column '" + name + "'");
        return *c;
    };
    std::vector<std::string> bound = {schema.t, schema.yf};
    for (const auto* o : {&schema.ycf, &schema.mu0, &schema.mu1, &schema.exp_flag})
        if (*o) bound.push_back(**o);

    std::vector<std::size_t> x_cols;
    if (!schema.x.empty()) {
        for (const auto& name : schema.x) x_cols.push_back(col(name));
    } else {
        for (std::size_t i = 0; i < table.header.size(); ++i) {
            const auto& h = table.header[i];
            if (h.rfind(schema.x_prefix, 0) == 0 && std::find(bound.begin(), bound.end(), h) == bound.end())
                x_cols.push_back(i);
        }
        if (x_cols.empty())
            throw ValidationError(origin + ": missing required covariate columns (prefix '" + schema.x_prefix + "')");
    }

    Dataset ds;
    const auto n = static_cast<Index>(table.rows.size());
    ds.x.resize(n, static_cast<Index>(x_cols.size()));
    for (std::size_t j = 0; j < x_cols.size(); ++j) ds.x.col(static_cast<Index>(j)) = detail::numeric_column(table, x_cols[j], origin);
    ds.t = detail::numeric_column(table, col(schema.t), origin);
    for (Index i = 0; i < n; ++i)
        if (ds.t[i] != 0.0 && ds.t[i] != 1.0)
            throw ValidationError(origin + ": treatment not binary at row " + std::to_string(i + 1));
    ds.yf = detail::numeric_column(table, col(schema.yf), origin);
    if (schema.ycf) ds.ycf = detail::numeric_column(table, col(*schema.ycf), origin);
    if (schema.mu0) ds.mu0 = detail::numeric_column(table, col(*schema.mu0), origin);
    if (schema.mu1) ds.mu1 = detail::numeric_column(table, col(*schema.mu1), origin);
    if (schema.exp_flag) ds.exp_flag = detail::numeric_column(table, col(*schema.exp_flag), origin);
    ds.outcome_kind = schema.outcome_kind;
    ds.validate();
    return ds;
}

inline Dataset load_csv_dataset(const std::filesystem::path& path, const CsvSchema& schema) {
    return dataset_from_table(csv::read(path), schema, path.string());
}

/// Default binding plus whichever of ycf, mu0/mu1 and e (experimental flag)
/// the header carries.
inline CsvSchema detect_schema(const std::vector<std::string>& header) {
    CsvSchema s;
    auto has = [&](const char* name) { return std::find(header.begin(), header.end(), name) != header.end(); };
    if (has("ycf")) s.ycf = "ycf";
    if (has("mu0") && has("mu1")) {
        s.mu0 = "mu0";
        s.mu1 = "mu1";
    }
    if (has("e")) s.exp_flag = "e";
    return s;
}

inline Dataset load_csv_dataset(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    return dataset_from_table(table, detect_schema(table.header), path.string());
}

/// Columns: x1..xd, t, yf, then optional ycf, mu0, mu1, e (experimental flag).
inline std::string dataset_to_csv(const Dataset& ds) {
    std::vector<std::string> header;
    for (Index j = 0; j < ds.d(); ++j) header.push_back("x" + std::to_string(j + 1));
    header.insert(header.end(), {"t", "yf"});
    if (ds.ycf) header.emplace_back("ycf");
    if (ds.mu0) header.insert(header.end(), {"mu0", "mu1"});
    if (ds.exp_flag) header.emplace_back("e");
    std::string out = csv::join(header) + "\n";
    for (Index i = 0; i < ds.n(); ++i) {
        std::vector<std::string> row;
        for (Index j = 0; j < ds.d(); ++j) row.push_back(format_double(ds.x(i, j)));
        row.push_back(format_double(ds.t[i]));
        row.push_back(format_double(ds.yf[i]));
        if (ds.ycf) row.push_back(format_double((*ds.ycf)[i]));
        if (ds.mu0) {
            row.push_back(format_double((*ds.mu0)[i]));
            row.push_back(format_double((*ds.mu1)[i]));
        }
        if (ds.exp_flag) row.push_back(format_double((*ds.exp_flag)[i]));
        out += csv::join(row) + "\n";
    }
    return out;
}

/// Schema matching dataset_to_csv output for a given dataset's optional columns.
inline CsvSchema schema_for(const Dataset& ds) {
    CsvSchema s;
    if (ds.ycf) s.ycf = "ycf";
    if (ds.mu0) {
        s.mu0 = "mu0";
        s.mu1 = "mu1";
    }
    if (ds.exp_flag) s.exp_flag = "e";
    s.outcome_kind = ds.outcome_kind;
    return s;
}

/// Manifest: one dataset path per line, relative paths resolved against the
/// manifest's directory. Blank lines and '#' comments are ignored.
inline std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path) {
    const auto text = csv::read_file(path);
    std::vector<std::filesystem::path> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto last = line.find_last_not_of(" \t");
        std::filesystem::path p = line.substr(first, last - first + 1);
        if (p.is_relative()) p = path.parent_path() / p;
        out.push_back(p);
    }
    if (out.empty()) throw ValidationError(path.string() + ": manifest lists no datasets");
    return out;
}

/// A single file reshuffled per iteration, or one file per iteration.
struct DataSource {
    std::vector<std::filesystem::path> files;
    std::optional<CsvSchema> schema;  // detected from each header when empty

    [[nodiscard]] Dataset load(std::size_t iteration) const {
        require(!files.empty(), "data source has no files");
        const auto& p = files.size() == 1 ? files.front() : files.at(iteration);
        return schema ? load_csv_dataset(p, *schema) : load_csv_dataset(p);
    }
};

}  // namespace cmsel
