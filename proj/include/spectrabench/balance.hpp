#pragma once

#include "spectrabench/linalg.hpp"

#include <cstdint>
#include <string>

namespace spectrabench {

enum class BalanceKind { original, stratified_resplit, smote, oversample, undersample };

std::string to_string(BalanceKind k);
/// Throws ConfigError for an unknown name.
BalanceKind parse_balance_kind(const std::string& name);

struct BalanceStrategy {
    BalanceKind kind = BalanceKind::original;
    int k_neighbors = 5;  // smote only
    std::uint64_t seed = 0;
};

struct Balanced {
    Matrix X;
    Labels y;
};

/// SMOTE. Original rows come first, verbatim; every class is raised to the
/// majority count with rows x + u·(nbr − x), nbr one of the min(k, n_c − 1)
/// Euclidean nearest same-class neighbors of x, u ~ U(0,1).
/// Throws DegenerateError naming a class with a single sample.
Balanced smote(const Matrix& X, const Labels& y, int k, std::uint64_t seed);

/// Appends rows drawn with replacement from each minority class up to the majority count.
Balanced random_oversample(const Matrix& X, const Labels& y, std::uint64_t seed);

/// Keeps a uniform without-replacement sample of each class at the minority count.
/// Surviving rows keep their original relative order.
Balanced random_undersample(const Matrix& X, const Labels& y, std::uint64_t seed);

/// Dispatches on the strategy. `original` and `stratified_resplit` return the input
/// unchanged: the resplit replaces the training partition at the dataset level.
Balanced apply_balance(const BalanceStrategy& strategy, const Matrix& X, const Labels& y);

}  // namespace spectrabench
