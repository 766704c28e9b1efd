#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmsel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// Bad input, bad parameters, violated preconditions. Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File system and parse failures. Maps to CLI exit code 1.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numeric routine that could not produce a result (e.g. failed factorization).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

inline Matrix take_rows(const Matrix& m, std::span<const Index> rows) {
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
    return out;
}

inline Vector take(const Vector& v, std::span<const Index> rows) {
    Vector out(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Index>(i)] = v[rows[i]];
    return out;
}

inline Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

/// Append a column to the right of x.
inline Matrix with_column(const Matrix& x, const Vector& col) {
    Matrix out(x.rows(), x.cols() + 1);
    out.leftCols(x.cols()) = x;
    out.col(x.cols()) = col;
    return out;
}

/// Append a constant column to the right of x.
inline Matrix with_constant_column(const Matrix& x, double value) {
    return with_column(x, Vector::Constant(x.rows(), value));
}

}  // namespace cmsel
