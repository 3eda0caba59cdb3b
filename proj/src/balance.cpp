#include "spectrabench/balance.hpp"

#include "spectrabench/error.hpp"
#include "spectrabench/rng.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace spectrabench {

namespace {

std::map<int, std::vector<std::size_t>> rows_by_class(const Matrix& X, const Labels& y) {
    if (static_cast<std::size_t>(X.rows()) != y.size()) {
        throw ShapeError("feature rows and labels differ in length");
    }
    if (y.empty()) throw DomainError("cannot balance an empty training set");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
    return by_class;
}

std::size_t majority_count(const std::map<int, std::vector<std::size_t>>& by_class) {
    std::size_t m = 0;
    for (const auto& [c, rows] : by_class) m = std::max(m, rows.size());
    return m;
}

Balanced with_appended(const Matrix& X, const Labels& y, const std::vector<Vector>& extra_rows,
                       const Labels& extra_labels) {
    Balanced out;
    out.X.resize(X.rows() + static_cast<Eigen::Index>(extra_rows.size()), X.cols());
    out.X.topRows(X.rows()) = X;
    for (std::size_t i = 0; i < extra_rows.size(); ++i) {
        out.X.row(X.rows() + static_cast<Eigen::Index>(i)) = extra_rows[i].transpose();
    }
    out.y = y;
    out.y.insert(out.y.end(), extra_labels.begin(), extra_labels.end());
    return out;
}

}  // namespace

std::string to_string(BalanceKind k) {
    switch (k) {
        case BalanceKind::original: return "original";
        case BalanceKind::stratified_resplit: return "stratified_resplit";
        case BalanceKind::smote: return "smote";
        case BalanceKind::oversample: return "oversample";
        case BalanceKind::undersample: return "undersample";
    }
    return "?";
}

BalanceKind parse_balance_kind(const std::string& name) {
    if (name == "original") return BalanceKind::original;
    if (name == "stratified_resplit") return BalanceKind::stratified_resplit;
    if (name == "smote") return BalanceKind::smote;
    if (name == "oversample") return BalanceKind::oversample;
    if (name == "undersample") return BalanceKind::undersample;
    throw ConfigError("unknown balance strategy '" + name + "'");
}

Balanced smote(const Matrix& X, const Labels& y, int k, std::uint64_t seed) {
    if (k < 1) throw DomainError("SMOTE needs k_neighbors >= 1");
    const auto by_class = rows_by_class(X, y);
    for (const auto& [c, rows] : by_class) {
        if (rows.size() < 2) {
            throw DegenerateError("SMOTE: class " + std::to_string(c) + " has a single sample");
        }
    }
    const std::size_t target = majority_count(by_class);

    std::vector<Vector> extra;
    Labels extra_y;
    for (const auto& [c, rows] : by_class) {
        const std::size_t need = target - rows.size();
        if (need == 0) continue;
        const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), rows.size() - 1);

        // Nearest same-class neighbors of each member, ties by row order.
        std::vector<std::vector<std::size_t>> nbrs(rows.size());
        for (std::size_t a = 0; a < rows.size(); ++a) {
            std::vector<std::pair<double, std::size_t>> d;
            d.reserve(rows.size() - 1);
            for (std::size_t b = 0; b < rows.size(); ++b) {
                if (a == b) continue;
                d.emplace_back((X.row(static_cast<Eigen::Index>(rows[a])) -
                                X.row(static_cast<Eigen::Index>(rows[b])))
                                   .squaredNorm(),
                               b);
            }
            std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
            for (std::size_t j = 0; j < kk; ++j) nbrs[a].push_back(d[j].second);
        }

        Rng rng(derive_seed(seed, {"smote", c}));
        for (std::size_t s = 0; s < need; ++s) {
            const std::size_t a = static_cast<std::size_t>(rng.below(rows.size()));
            const std::size_t b = nbrs[a][static_cast<std::size_t>(rng.below(kk))];
            const double u = rng.uniform();
            const Vector xa = X.row(static_cast<Eigen::Index>(rows[a])).transpose();
            const Vector xb = X.row(static_cast<Eigen::Index>(rows[b])).transpose();
            extra.push_back(xa + u * (xb - xa));
            extra_y.push_back(c);
        }
    }
    return with_appended(X, y, extra, extra_y);
}

Balanced random_oversample(const Matrix& X, const Labels& y, std::uint64_t seed) {
    const auto by_class = rows_by_class(X, y);
    const std::size_t target = majority_count(by_class);
    std::vector<Vector> extra;
    Labels extra_y;
    for (const auto& [c, rows] : by_class) {
        Rng rng(derive_seed(seed, {"oversample", c}));
        for (std::size_t s = rows.size(); s < target; ++s) {
            const std::size_t r = rows[static_cast<std::size_t>(rng.below(rows.size()))];
            extra.push_back(X.row(static_cast<Eigen::Index>(r)).transpose());
            extra_y.push_back(c);
        }
    }
    return with_appended(X, y, extra, extra_y);
}

Balanced random_undersample(const Matrix& X, const Labels& y, std::uint64_t seed) {
    const auto by_class = rows_by_class(X, y);
    std::size_t target = SIZE_MAX;
    for (const auto& [c, rows] : by_class) target = std::min(target, rows.size());

    std::vector<std::size_t> keep;
    for (const auto& [c, rows] : by_class) {
        Rng rng(derive_seed(seed, {"undersample", c}));
        for (std::size_t j : rng.sample_without_replacement(rows.size(), target)) {
            keep.push_back(rows[j]);
        }
    }
    std::sort(keep.begin(), keep.end());
    return {select_rows(X, keep), select(y, keep)};
}

Balanced apply_balance(const BalanceStrategy& strategy, const Matrix& X, const Labels& y) {
    switch (strategy.kind) {
        case BalanceKind::smote: return smote(X, y, strategy.k_neighbors, strategy.seed);
        case BalanceKind::oversample: return random_oversample(X, y, strategy.seed);
        case BalanceKind::undersample: return random_undersample(X, y, strategy.seed);
        case BalanceKind::original:
        case BalanceKind::stratified_resplit: break;
    }
    if (static_cast<std::size_t>(X.rows()) != y.size()) {
        throw ShapeError("feature rows and labels differ in length");
    }
    return {X, y};
}

}  // namespace spectrabench
