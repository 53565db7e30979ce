#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace wafp {

/// Row-major dense matrix; batches are stored one sample per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Error hierarchy. The CLI maps these onto process exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct InputError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};
struct ContractError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

inline std::span<const double> row_span(const RowMatrix& m, Eigen::Index row) {
    return {m.data() + row * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline std::span<double> row_span(RowMatrix& m, Eigen::Index row) {
    return {m.data() + row * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline bool all_finite(const RowMatrix& m) { return m.allFinite(); }

}  // namespace wafp
