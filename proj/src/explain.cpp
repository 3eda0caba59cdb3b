#include "spectrabench/explain.hpp"

#include "spectrabench/error.hpp"
#include "spectrabench/parallel.hpp"
#include "spectrabench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spectrabench {

ImportanceMetric parse_importance_metric(const std::string& name) {
    if (name == "accuracy") return ImportanceMetric::accuracy;
    if (name == "f1_macro") return ImportanceMetric::f1_macro;
    throw ConfigError("importance metric must be accuracy or f1_macro");
}

namespace {

double score(const Labels& y, const Labels& pred, ImportanceMetric metric) {
    Labels classes = unique_labels(y);
    for (int c : unique_labels(pred)) {
        if (!std::binary_search(classes.begin(), classes.end(), c)) classes.insert(std::upper_bound(classes.begin(), classes.end(), c), c);
    }
    const auto m = task_metrics(confusion(y, pred, classes));
    return metric == ImportanceMetric::accuracy ? m.accuracy : m.f1_macro;
}

}  // namespace

Vector permutation_importance(const FittedPipeline& model, const Matrix& X, const Labels& y,
                              ImportanceMetric metric, int n_repeats, std::uint64_t seed) {
    if (X.rows() == 0) throw DomainError("permutation importance needs at least one row");
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw ShapeError("features and labels misaligned");
    if (n_repeats < 1) throw DomainError("n_repeats must be >= 1");
    const double baseline = score(y, model.predict(X), metric);
    Vector out(X.cols());
    parallel_for(static_cast<std::size_t>(X.cols()), [&](std::size_t f) {
        Matrix Xp = X;
        const auto col = static_cast<Eigen::Index>(f);
        double total = 0.0;
        for (int r = 0; r < n_repeats; ++r) {
            std::vector<std::size_t> perm(static_cast<std::size_t>(X.rows()));
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            Rng rng(derive_seed(seed, {"permutation", f, r}));
            rng.shuffle(perm);
            for (std::size_t i = 0; i < perm.size(); ++i) Xp(static_cast<Eigen::Index>(i), col) = X(static_cast<Eigen::Index>(perm[i]), col);
            total += score(y, model.predict(Xp), metric);
        }
        out[col] = baseline - total / n_repeats;
    });
    return out;
}

Vector band_importance(const Vector& feature_importance, const GroupMap& map, std::size_t band_count) {
    if (static_cast<std::size_t>(feature_importance.size()) != map.size()) {
        throw ShapeError("importance has " + std::to_string(feature_importance.size()) + " entries, group map " +
                         std::to_string(map.size()));
    }
    Vector out = Vector::Zero(static_cast<Eigen::Index>(band_count));
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (map[i].band >= band_count) throw ShapeError("group map band index out of range");
        out[static_cast<Eigen::Index>(map[i].band)] += feature_importance[static_cast<Eigen::Index>(i)];
    }
    return out;
}

namespace {

std::vector<int> descending_ranks(const Vector& v) {
    std::vector<std::size_t> order(static_cast<std::size_t>(v.size()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return v[static_cast<Eigen::Index>(a)] > v[static_cast<Eigen::Index>(b)];
    });
    std::vector<int> rank(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<int>(r) + 1;
    return rank;
}

}  // namespace

ConsensusSelection consensus_bands(const Vector& ripeness_importance, const Vector& firmness_importance,
                                   const WavelengthGrid& grid, double wavelength_cutoff_nm, std::size_t top_n) {
    const auto B = grid.size();
    if (static_cast<std::size_t>(ripeness_importance.size()) != B ||
        static_cast<std::size_t>(firmness_importance.size()) != B) {
        throw ShapeError("importance vectors must have one entry per band");
    }
    if (!ripeness_importance.allFinite() || !firmness_importance.allFinite()) {
        throw DomainError("non-finite band importance");
    }
    const auto rr = descending_ranks(ripeness_importance);
    const auto rf = descending_ranks(firmness_importance);
    std::vector<std::size_t> eligible;
    for (std::size_t b = 0; b < B; ++b) {
        if (grid[b] < wavelength_cutoff_nm) eligible.push_back(b);
    }
    if (eligible.size() < top_n) {
        throw CapacityError("only " + std::to_string(eligible.size()) + " bands below " +
                            std::to_string(wavelength_cutoff_nm) + " nm, need " + std::to_string(top_n));
    }
    std::stable_sort(eligible.begin(), eligible.end(),
                     [&](auto a, auto b) { return rr[a] + rf[a] < rr[b] + rf[b]; });
    eligible.resize(top_n);
    std::sort(eligible.begin(), eligible.end());
    ConsensusSelection out;
    for (auto b : eligible) {
        out.band_indices.push_back(b);
        out.wavelengths_nm.push_back(grid[b]);
        out.joint_ranks.push_back(rr[b] + rf[b]);
    }
    return out;
}

std::pair<Vector, Vector> rolling_band_importance(const Vector& per_band, int window) {
    if (window < 1 || window % 2 == 0) throw DomainError("rolling window must be odd and positive");
    const auto n = per_band.size();
    const Eigen::Index half = window / 2;
    Vector mean(n), sd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto lo = std::max<Eigen::Index>(0, i - half);
        const auto hi = std::min<Eigen::Index>(n - 1, i + half);
        const auto seg = per_band.segment(lo, hi - lo + 1);
        mean[i] = seg.mean();
        sd[i] = std::sqrt((seg.array() - mean[i]).square().mean());
    }
    return {mean, sd};
}

std::vector<GroupDrop> group_ablation(const PipelineConfig& cfg, const LabeledFeatures& train,
                                      const LabeledFeatures& test, const GroupMap& map) {
    if (static_cast<std::size_t>(train.X.cols()) != map.size()) throw ShapeError("group map does not match features");
    const auto full = evaluate_paired(fit_paired(cfg, train), test);
    auto drop = [](double base, double without) { return base > 0.0 ? 100.0 * (base - without) / base : 0.0; };

    std::vector<GroupDrop> out(kTransformOrder.size());
    parallel_for(kTransformOrder.size(), [&](std::size_t g) {
        const auto removed = kTransformOrder[g];
        std::vector<std::size_t> keep;
        for (std::size_t j = 0; j < map.size(); ++j) {
            if (map[j].transform != removed) keep.push_back(j);
        }
        LabeledFeatures tr = train, te = test;
        tr.X = select_cols(train.X, keep);
        te.X = select_cols(test.X, keep);
        const auto m = evaluate_paired(fit_paired(cfg, tr), te);
        out[g] = {removed, drop(full.ripeness.accuracy, m.ripeness.accuracy),
                  drop(full.firmness.accuracy, m.firmness.accuracy), drop(full.overall_accuracy, m.overall_accuracy)};
    });
    return out;
}

}  // namespace spectrabench
