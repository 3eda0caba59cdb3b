#include "spectrabench/linalg.hpp"

#include <algorithm>

namespace spectrabench {

Matrix select_rows(const Matrix& X, const std::vector<std::size_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

Matrix select_cols(const Matrix& X, const std::vector<std::size_t>& cols) {
    Matrix out(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        out.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(cols[j]));
    }
    return out;
}

Labels unique_labels(const Labels& y) {
    Labels out = y;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace spectrabench
