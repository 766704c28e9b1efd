#pragma once

#include "cmsel/core/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace cmsel {

inline double mean(std::span<const double> v) {
    require(!v.empty(), "mean of empty sequence");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double mean(const Vector& v) { return mean(std::span<const double>(v.data(), static_cast<std::size_t>(v.size()))); }

/// Population variance (n denominator).
inline double population_variance(const Vector& v) {
    const double m = mean(v);
    return (v.array() - m).square().sum() / static_cast<double>(v.size());
}

/// Average ranks (1-based) with ties sharing the mean rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

/// Pearson correlation; nullopt when either side has zero variance.
inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "pearson: length mismatch");
    const auto n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
    if (saa == sbb && sab == saa) return 1.0;
    return sab / std::sqrt(saa * sbb);
}

/// Spearman rank correlation with average-rank ties; nullopt on zero variance.
inline std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    return pearson(ra, rb);
}

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) return "nan";
    return {buf, ptr};
}

inline std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    while (last != first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || first == last) return std::nullopt;
    return v;
}

/// [1, x]: intercept column followed by the covariates.
inline Matrix linear_design(const Matrix& x) {
    Matrix out(x.rows(), x.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(x.cols()) = x;
    return out;
}

/// Result of minimizing sum_i w_i (z_i - a_i^T beta)^2.
struct WlsSolution {
    Vector beta;
    bool ridge_fallback = false;
};

/// Weighted least squares via normal equations. Falls back to a 1e-8 ridge
/// when the weighted Gram matrix is rank deficient.
inline WlsSolution weighted_least_squares(const Matrix& design, const Vector& z, const Vector& w) {
    require(design.rows() == z.size() && z.size() == w.size(), "weighted_least_squares: size mismatch");
    const Matrix aw = design.array().colwise() * w.array();
    Matrix gram = design.transpose() * aw;
    const Vector rhs = aw.transpose() * z;
    Eigen::ColPivHouseholderQR<Matrix> qr(gram);
    WlsSolution out;
    if (qr.rank() < gram.cols()) {
        gram.diagonal().array() += 1e-8;
        out.ridge_fallback = true;
        out.beta = gram.ldlt().solve(rhs);
    } else {
        out.beta = qr.solve(rhs);
    }
    return out;
}

}  // namespace cmsel
