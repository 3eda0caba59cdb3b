#include "spectrabench/evaluate.hpp"

#include "spectrabench/dataset.hpp"
#include "spectrabench/error.hpp"
#include "spectrabench/parallel.hpp"
#include "spectrabench/rng.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace spectrabench {

std::int64_t ConfusionMatrix::total() const {
    std::int64_t t = 0;
    for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
    return t;
}

ConfusionMatrix ConfusionMatrix::drop_true_class(int label) const {
    ConfusionMatrix out = *this;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] == label) std::fill(out.counts[i].begin(), out.counts[i].end(), 0);
    }
    return out;
}

ConfusionMatrix confusion(const Labels& y_true, const Labels& y_pred, const Labels& classes) {
    if (y_true.size() != y_pred.size()) {
        throw ShapeError("confusion: " + std::to_string(y_true.size()) + " true labels vs " +
                         std::to_string(y_pred.size()) + " predictions");
    }
    ConfusionMatrix cm{classes, std::vector<std::vector<std::int64_t>>(
                                    classes.size(), std::vector<std::int64_t>(classes.size(), 0))};
    auto index_of = [&](int label) {
        const auto it = std::find(classes.begin(), classes.end(), label);
        if (it == classes.end()) throw LabelError("label " + std::to_string(label) + " not in class list");
        return static_cast<std::size_t>(it - classes.begin());
    };
    for (std::size_t t = 0; t < y_true.size(); ++t) ++cm.counts[index_of(y_true[t])][index_of(y_pred[t])];
    return cm;
}

TaskMetrics task_metrics(const ConfusionMatrix& cm) {
    TaskMetrics m;
    const std::size_t K = cm.classes.size();
    std::int64_t trace = 0;
    const std::int64_t total = cm.total();
    for (std::size_t c = 0; c < K; ++c) {
        std::int64_t tp = cm.counts[c][c];
        std::int64_t row = 0;
        std::int64_t col = 0;
        for (std::size_t j = 0; j < K; ++j) {
            row += cm.counts[c][j];
            col += cm.counts[j][c];
        }
        trace += tp;
        ClassScores s;
        s.support = row;
        s.precision = col > 0 ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
        s.recall = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
        s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
        m.per_class[cm.classes[c]] = s;
    }
    m.n_scored = total;
    m.accuracy = total > 0 ? static_cast<double>(trace) / static_cast<double>(total) : 0.0;
    int present = 0;
    for (const auto& [label, s] : m.per_class) {
        if (s.support == 0) continue;
        ++present;
        m.f1_macro += s.f1;
        m.f1_weighted += static_cast<double>(s.support) / static_cast<double>(total) * s.f1;
    }
    if (present > 0) m.f1_macro /= present;
    return m;
}

PairedMetrics paired_metrics(const ConfusionMatrix& ripeness, const ConfusionMatrix& firmness) {
    PairedMetrics p;
    p.ripeness = task_metrics(ripeness);
    p.firmness = task_metrics(firmness.drop_true_class(static_cast<int>(FirmnessClass::unknown)));
    p.overall_accuracy = (p.ripeness.accuracy + p.firmness.accuracy) / 2.0;
    p.mean_f1_macro = (p.ripeness.f1_macro + p.firmness.f1_macro) / 2.0;
    return p;
}

PairedMetrics score_tasks(const Labels& ripeness_true, const Labels& ripeness_pred,
                          const Labels& firmness_true, const Labels& firmness_pred) {
    return paired_metrics(confusion(ripeness_true, ripeness_pred, {0, 1, 2}),
                          confusion(firmness_true, firmness_pred, {0, 1, 2, 3}));
}

std::map<std::string, double> metric_values(const PairedMetrics& m) {
    return {{"acc_r", m.ripeness.accuracy},
            {"acc_f", m.firmness.accuracy},
            {"f1_macro_r", m.ripeness.f1_macro},
            {"f1_macro_f", m.firmness.f1_macro},
            {"f1_weighted_r", m.ripeness.f1_weighted},
            {"f1_weighted_f", m.firmness.f1_weighted},
            {"overall_accuracy", m.overall_accuracy},
            {"mean_f1_macro", m.mean_f1_macro}};
}

LabeledFeatures LabeledFeatures::rows(const std::vector<std::size_t>& idx) const {
    LabeledFeatures out;
    out.X = select_rows(X, idx);
    out.ripeness = select(ripeness, idx);
    out.firmness = select(firmness, idx);
    if (!ids.empty()) out.ids = select(ids, idx);
    return out;
}

PairedPipeline fit_paired(const PipelineConfig& cfg, const LabeledFeatures& train) {
    PipelineConfig r = cfg;
    PipelineConfig f = cfg;
    r.seed = derive_seed(cfg.seed, {"ripeness"});
    f.seed = derive_seed(cfg.seed, {"firmness"});
    return {fit_pipeline(r, train.X, train.ripeness), fit_pipeline(f, train.X, train.firmness)};
}

PairedMetrics evaluate_paired(const PairedPipeline& p, const LabeledFeatures& test) {
    return score_tasks(test.ripeness, p.ripeness.predict(test.X), test.firmness, p.firmness.predict(test.X));
}

MetricSummary summarize(const std::vector<double>& values) {
    MetricSummary s;
    const auto n = values.size();
    if (n == 0) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    if (n >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(n - 1));
        const boost::math::students_t t(static_cast<double>(n - 1));
        const double half = boost::math::quantile(t, 0.975) * s.std;
        s.ci_lo = s.mean - half;
        s.ci_hi = s.mean + half;
    } else {
        s.ci_lo = s.ci_hi = s.mean;
    }
    s.cv_coefficient = s.mean != 0.0 ? s.std / s.mean : 0.0;
    return s;
}

std::vector<int> stratified_folds(const Labels& y, int k, std::uint64_t seed) {
    if (k < 2) throw DomainError("cross-validation needs k >= 2");
    std::vector<int> fold_of(y.size(), 0);
    Rng rng(derive_seed(seed, {"folds"}));
    std::size_t next = 0;
    for (int c : unique_labels(y)) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] == c) members.push_back(i);
        }
        rng.shuffle(members);
        for (std::size_t i : members) fold_of[i] = static_cast<int>(next++ % static_cast<std::size_t>(k));
    }
    return fold_of;
}

FoldScores cross_validate(const PipelineConfig& cfg, const LabeledFeatures& data, int k, std::uint64_t seed) {
    if (k < 2) throw DomainError("cross-validation needs k >= 2");
    FoldScores out;
    std::map<int, std::size_t> class_counts;
    for (int c : data.ripeness) ++class_counts[c];
    std::size_t smallest = data.size();
    for (const auto& [c, n] : class_counts) smallest = std::min(smallest, n);
    out.k = k;
    if (smallest < static_cast<std::size_t>(k)) {
        out.k = std::max(2, static_cast<int>(smallest));
        out.warning = "fold count reduced from " + std::to_string(k) + " to " + std::to_string(out.k) +
                      ": smallest ripeness class has " + std::to_string(smallest) + " samples";
    }
    if (data.size() < static_cast<std::size_t>(out.k)) throw DomainError("fewer samples than folds");

    out.fold_of = stratified_folds(data.ripeness, out.k, seed);
    out.per_fold.resize(static_cast<std::size_t>(out.k));
    out.oof_ripeness.assign(data.size(), -1);
    out.oof_firmness.assign(data.size(), -1);

    parallel_for(static_cast<std::size_t>(out.k), [&](std::size_t f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < data.size(); ++i) {
            (out.fold_of[i] == static_cast<int>(f) ? test : train).push_back(i);
        }
        PipelineConfig fold_cfg = cfg;
        fold_cfg.seed = derive_seed(cfg.seed, {"fold", seed, f});
        const auto model = fit_paired(fold_cfg, data.rows(train));
        const auto held = data.rows(test);
        const Labels pr = model.ripeness.predict(held.X);
        const Labels pf = model.firmness.predict(held.X);
        for (std::size_t j = 0; j < test.size(); ++j) {
            out.oof_ripeness[test[j]] = pr[j];
            out.oof_firmness[test[j]] = pf[j];
        }
        out.per_fold[f] = score_tasks(held.ripeness, pr, held.firmness, pf);
    });

    std::map<std::string, std::vector<double>> columns;
    for (const auto& m : out.per_fold) {
        for (const auto& [name, v] : metric_values(m)) columns[name].push_back(v);
    }
    for (const auto& [name, values] : columns) out.summary[name] = summarize(values);
    return out;
}

std::pair<double, double> wilson_ci(std::int64_t successes, std::int64_t n, double confidence) {
    if (n < 1 || successes < 0 || successes > n) throw DomainError("wilson_ci needs 0 <= successes <= n, n >= 1");
    if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must lie in (0, 1)");
    const double z = boost::math::quantile(boost::math::normal(), 1.0 - (1.0 - confidence) / 2.0);
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nn;
    const double denom = 1.0 + z * z / nn;
    const double center = (p + z * z / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
    const double lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
    const double hi = successes == n ? 1.0 : std::min(1.0, center + half);
    return {lo, hi};
}

std::int64_t successes_from_rate(double rate, std::int64_t n) {
    return static_cast<std::int64_t>(std::floor(rate * static_cast<double>(n) + 0.5 + 1e-9));
}

double cohen_d_paired(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("cohen_d_paired needs equal lengths");
    if (a.size() < 2) throw DomainError("cohen_d_paired needs at least 2 pairs");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(d.size() - 1));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
        throw DegenerateError("paired differences have zero variance");
    }
    return mean / sd;
}

namespace {

// Average ranks per column (fold), rank 1 for the highest score, averaged over folds.
std::vector<double> mean_ranks(const Matrix& scores) {
    const auto M = scores.rows();
    const auto k = scores.cols();
    std::vector<double> sum(static_cast<std::size_t>(M), 0.0);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(M));
    for (Eigen::Index j = 0; j < k; ++j) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](auto a, auto b) { return scores(a, j) > scores(b, j); });
        std::size_t i = 0;
        while (i < order.size()) {
            std::size_t e = i;
            while (e + 1 < order.size() && scores(order[e + 1], j) == scores(order[i], j)) ++e;
            const double rank = (static_cast<double>(i) + static_cast<double>(e)) / 2.0 + 1.0;
            for (std::size_t t = i; t <= e; ++t) sum[static_cast<std::size_t>(order[t])] += rank;
            i = e + 1;
        }
    }
    for (auto& s : sum) s /= static_cast<double>(k);
    return sum;
}

void check_score_matrix(const Matrix& scores) {
    if (scores.rows() < 2 || scores.cols() < 2) throw DomainError("need at least 2 models and 2 folds");
    if (!scores.allFinite()) throw DomainError("non-finite score");
}

}  // namespace

FriedmanResult friedman(const Matrix& scores) {
    check_score_matrix(scores);
    FriedmanResult r;
    const double M = static_cast<double>(scores.rows());
    const double k = static_cast<double>(scores.cols());
    r.mean_ranks = mean_ranks(scores);
    double ss = 0.0;
    for (double rank : r.mean_ranks) ss += (rank - (M + 1.0) / 2.0) * (rank - (M + 1.0) / 2.0);
    r.chi2 = 12.0 * k / (M * (M + 1.0)) * ss;
    r.dof = static_cast<int>(scores.rows()) - 1;
    r.p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(r.dof), r.chi2));
    return r;
}

double nemenyi_q(int n_models, double alpha) {
    // Upper 5% point of the studentized range with infinite df, divided by √2, M = 2..20.
    static constexpr std::array<double, 19> q05{
        1.959964, 2.343701, 2.569032, 2.727774, 2.849705, 2.948320, 3.030878, 3.101730, 3.163684, 3.218654,
        3.268004, 3.312739, 3.353618, 3.391230, 3.426041, 3.458425, 3.488685, 3.517073, 3.543799};
    if (std::abs(alpha - 0.05) > 1e-12) throw UnsupportedError("Nemenyi q is tabulated for alpha = 0.05 only");
    if (n_models < 2 || n_models > 20) {
        throw UnsupportedError("Nemenyi q is tabulated for 2..20 models, got " + std::to_string(n_models));
    }
    return q05[static_cast<std::size_t>(n_models - 2)];
}

NemenyiResult nemenyi(const Matrix& scores, double alpha) {
    check_score_matrix(scores);
    NemenyiResult r;
    const int M = static_cast<int>(scores.rows());
    const double k = static_cast<double>(scores.cols());
    r.q = nemenyi_q(M, alpha);
    r.critical_difference = r.q * std::sqrt(M * (M + 1.0) / (6.0 * k));
    r.mean_ranks = mean_ranks(scores);
    r.significant.assign(static_cast<std::size_t>(M), std::vector<bool>(static_cast<std::size_t>(M), false));
    for (std::size_t i = 0; i < r.mean_ranks.size(); ++i) {
        for (std::size_t j = 0; j < r.mean_ranks.size(); ++j) {
            r.significant[i][j] = std::abs(r.mean_ranks[i] - r.mean_ranks[j]) > r.critical_difference;
        }
    }
    return r;
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

double range_statistic(const Matrix& g, const std::vector<Eigen::Index>& rows,
                       const std::vector<Eigen::Index>& cols) {
    std::vector<double> col_ranges, row_ranges;
    for (auto c : cols) {
        double lo = g(rows[0], c), hi = lo;
        for (auto r : rows) {
            lo = std::min(lo, g(r, c));
            hi = std::max(hi, g(r, c));
        }
        col_ranges.push_back(hi - lo);
    }
    for (auto r : rows) {
        double lo = g(r, cols[0]), hi = lo;
        for (auto c : cols) {
            lo = std::min(lo, g(r, c));
            hi = std::max(hi, g(r, c));
        }
        row_ranges.push_back(hi - lo);
    }
    return median(col_ranges) - median(row_ranges);
}

// Linear interpolation between order statistics.
double percentile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

BootstrapResult bootstrap_median_range_diff(const Matrix& grid, int n_resamples, std::uint64_t seed,
                                            double confidence) {
    if (grid.rows() < 2 || grid.cols() < 2) throw DomainError("bootstrap grid must be at least 2x2");
    if (n_resamples < 1) throw DomainError("n_resamples must be >= 1");
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(grid.rows())), cols(static_cast<std::size_t>(grid.cols()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    std::iota(cols.begin(), cols.end(), Eigen::Index{0});
    BootstrapResult out;
    out.statistic = range_statistic(grid, rows, cols);

    Rng rng(derive_seed(seed, {"bootstrap"}));
    std::vector<double> stats(static_cast<std::size_t>(n_resamples));
    std::vector<Eigen::Index> rr(rows.size()), cc(cols.size());
    for (auto& s : stats) {
        for (auto& r : rr) r = static_cast<Eigen::Index>(rng.below(rows.size()));
        for (auto& c : cc) c = static_cast<Eigen::Index>(rng.below(cols.size()));
        s = range_statistic(grid, rr, cc);
    }
    std::sort(stats.begin(), stats.end());
    const double tail = (1.0 - confidence) / 2.0;
    out.lo = percentile(stats, tail);
    out.hi = percentile(stats, 1.0 - tail);
    return out;
}

}  // namespace spectrabench
