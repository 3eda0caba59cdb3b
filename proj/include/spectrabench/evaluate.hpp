#pragma once

#include "spectrabench/linalg.hpp"
#include "spectrabench/pipeline.hpp"
#include "spectrabench/serialize.hpp"

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace spectrabench {

struct ConfusionMatrix {
    Labels classes;
    std::vector<std::vector<std::int64_t>> counts;  // [true][predicted]

    std::int64_t total() const;
    /// Copy without the row of `label` (its column stays).
    ConfusionMatrix drop_true_class(int label) const;
};

/// Throws ShapeError on length mismatch and LabelError for labels outside `classes`.
ConfusionMatrix confusion(const Labels& y_true, const Labels& y_pred, const Labels& classes);

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;
};

/// Zero denominators give 0. Macro and weighted averages run over classes with support > 0.
struct TaskMetrics {
    double accuracy = 0.0;
    std::map<int, ClassScores> per_class;
    double f1_macro = 0.0;
    double f1_weighted = 0.0;
    std::int64_t n_scored = 0;
};

TaskMetrics task_metrics(const ConfusionMatrix& cm);

struct PairedMetrics {
    TaskMetrics ripeness;
    TaskMetrics firmness;
    double overall_accuracy = 0.0;
    double mean_f1_macro = 0.0;
};

/// Drops the `unknown` firmness row before scoring.
PairedMetrics paired_metrics(const ConfusionMatrix& ripeness, const ConfusionMatrix& firmness);

/// Scores label vectors for both tasks with the fixed class encodings.
PairedMetrics score_tasks(const Labels& ripeness_true, const Labels& ripeness_pred,
                          const Labels& firmness_true, const Labels& firmness_pred);

/// Named scalar view: acc_r, acc_f, f1_macro_r, f1_macro_f, f1_weighted_r, f1_weighted_f,
/// overall_accuracy, mean_f1_macro.
std::map<std::string, double> metric_values(const PairedMetrics& m);

/// Features with both task labels, one row per sample.
struct LabeledFeatures {
    Matrix X;
    Labels ripeness;
    Labels firmness;
    std::vector<std::string> ids;

    std::size_t size() const { return ripeness.size(); }
    LabeledFeatures rows(const std::vector<std::size_t>& idx) const;
};

/// One pipeline per task, sharing a configuration.
struct PairedPipeline {
    FittedPipeline ripeness;
    FittedPipeline firmness;
};

/// Task seeds are derived from cfg.seed and the task name.
PairedPipeline fit_paired(const PipelineConfig& cfg, const LabeledFeatures& train);
PairedMetrics evaluate_paired(const PairedPipeline& p, const LabeledFeatures& test);

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  // sample std across folds
    double cv_coefficient = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

/// mean ± t_{k−1, 0.025}·std.
MetricSummary summarize(const std::vector<double>& values);

struct FoldScores {
    int k = 0;
    std::string warning;
    std::vector<PairedMetrics> per_fold;
    std::map<std::string, MetricSummary> summary;
    std::vector<int> fold_of;  // fold index of each sample
    Labels oof_ripeness;       // out-of-fold predictions
    Labels oof_firmness;
};

/// Shuffled stratified fold assignment: each class is dealt round-robin, continuing
/// where the previous class stopped. Deterministic per seed.
std::vector<int> stratified_folds(const Labels& y, int k, std::uint64_t seed);

/// k-fold CV stratified on ripeness. k is reduced to the smallest class size (with a
/// warning) when a class has fewer than k members. Throws DomainError for k < 2.
FoldScores cross_validate(const PipelineConfig& cfg, const LabeledFeatures& data, int k,
                          std::uint64_t seed);

/// Wilson score interval.
std::pair<double, double> wilson_ci(std::int64_t successes, std::int64_t n, double confidence = 0.95);

/// round(rate·n) with halves rounded up.
std::int64_t successes_from_rate(double rate, std::int64_t n);

/// mean(a − b) / sample-std(a − b). Throws DegenerateError when the differences are constant.
double cohen_d_paired(const std::vector<double>& a, const std::vector<double>& b);

struct FriedmanResult {
    double chi2 = 0.0;
    int dof = 0;
    double p = 1.0;
    std::vector<double> mean_ranks;  // rank 1 = best (highest score)
};

/// scores: M models × k folds.
FriedmanResult friedman(const Matrix& scores);

/// q_α(M) of the two-tailed Nemenyi test (infinite-df studentized range over √2).
/// Tabulated for α = 0.05 and 2 ≤ M ≤ 20; anything else throws UnsupportedError.
double nemenyi_q(int n_models, double alpha = 0.05);

struct NemenyiResult {
    double q = 0.0;
    double critical_difference = 0.0;
    std::vector<double> mean_ranks;
    std::vector<std::vector<bool>> significant;
};

NemenyiResult nemenyi(const Matrix& scores, double alpha = 0.05);

struct BootstrapResult {
    double statistic = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

/// Median over configs (columns) of the across-model range minus the median over models
/// (rows) of the across-config range; rows and columns resampled with replacement;
/// percentile interval.
BootstrapResult bootstrap_median_range_diff(const Matrix& grid, int n_resamples, std::uint64_t seed,
                                            double confidence = 0.95);

template <typename T>
struct Measured {
    T result;
    double wall_time_s = 0.0;
    std::size_t size_bytes = 0;
};

/// Runs fn under a monotonic clock. The size is the serialized length when the
/// result has save(ByteWriter&).
template <typename Fn>
auto measure(Fn&& fn) {
    using T = decltype(fn());
    const auto t0 = std::chrono::steady_clock::now();
    T result = fn();
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::size_t size = 0;
    if constexpr (requires(const T& r, ByteWriter& w) { r.save(w); }) {
        ByteWriter w;
        result.save(w);
        size = w.bytes().size();
    }
    return Measured<T>{std::move(result), dt, size};
}

}  // namespace spectrabench
