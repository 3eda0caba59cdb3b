#pragma once

#include <Eigen/Dense>

#include <vector>

namespace spectrabench {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Integer class labels. Task encodings live in dataset.hpp.
using Labels = std::vector<int>;

/// Rows of X selected by index, in the given order.
Matrix select_rows(const Matrix& X, const std::vector<std::size_t>& rows);

/// Columns of X selected by index, in the given order.
Matrix select_cols(const Matrix& X, const std::vector<std::size_t>& cols);

template <typename T>
std::vector<T> select(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(v[i]);
    return out;
}

/// Sorted distinct values of y.
Labels unique_labels(const Labels& y);

}  // namespace spectrabench
