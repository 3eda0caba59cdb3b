#pragma once

#include "spectrabench/dataset.hpp"
#include "spectrabench/linalg.hpp"
#include "spectrabench/rng.hpp"

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

namespace sbtest {

using namespace spectrabench;

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(lo, hi);
    return m;
}

/// Gaussian blobs with centers spaced `gap` apart along every axis.
inline void blobs(Rng& rng, int n_per_class, int n_classes, int n_features, double gap, Matrix& X, Labels& y) {
    X.resize(n_per_class * n_classes, n_features);
    y.clear();
    for (int c = 0; c < n_classes; ++c) {
        for (int i = 0; i < n_per_class; ++i) {
            const auto row = c * n_per_class + i;
            for (int f = 0; f < n_features; ++f) X(row, f) = gap * c + rng.normal();
            y.push_back(c);
        }
    }
}

inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    auto dir = std::filesystem::temp_directory_path() /
               ("sbtest_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
}

inline WavelengthGrid uniform_grid(std::size_t n, double lo = 400.0, double hi = 1000.0) {
    std::vector<double> nm(n);
    for (std::size_t i = 0; i < n; ++i) nm[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return WavelengthGrid(nm);
}

}  // namespace sbtest
