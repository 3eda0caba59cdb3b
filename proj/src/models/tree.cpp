#include "spectrabench/models/tree.hpp"

#include "spectrabench/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace spectrabench {

Criterion parse_criterion(const std::string& name) {
    if (name == "gini") return Criterion::gini;
    if (name == "entropy") return Criterion::entropy;
    if (name == "squared_error") return Criterion::squared_error;
    throw ConfigError("unknown split criterion '" + name + "'");
}

int Tree::apply(const Matrix& X, Eigen::Index row) const {
    int n = 0;
    while (!nodes_[static_cast<std::size_t>(n)].is_leaf()) {
        const auto& node = nodes_[static_cast<std::size_t>(n)];
        n = X(row, node.feature) <= node.threshold ? node.left : node.right;
    }
    return n;
}

void Tree::set_value(int node, std::span<const double> v) {
    std::copy(v.begin(), v.end(), values_.begin() + static_cast<std::ptrdiff_t>(node) *
                                                         static_cast<std::ptrdiff_t>(value_dim_));
}

int Tree::depth() const {
    if (nodes_.empty()) return 0;
    std::vector<int> d(nodes_.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes_[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
        }
    }
    return best;
}

void Tree::save(ByteWriter& out) const {
    out.u64(value_dim_);
    out.u64(nodes_.size());
    for (const auto& n : nodes_) {
        out.i64(n.feature);
        out.f64(n.threshold);
        out.i64(n.left);
        out.i64(n.right);
    }
    out.f64s(values_);
    out.f64s(importance_);
}

void Tree::load(ByteReader& in) {
    value_dim_ = in.u64();
    nodes_.resize(in.u64());
    for (auto& n : nodes_) {
        n.feature = static_cast<int>(in.i64());
        n.threshold = in.f64();
        n.left = static_cast<int>(in.i64());
        n.right = static_cast<int>(in.i64());
    }
    values_ = in.f64s();
    importance_ = in.f64s();
    if (values_.size() != nodes_.size() * value_dim_) throw ParseError("corrupt tree payload");
}

Presort presort_columns(const Matrix& X) {
    Presort p;
    const auto n = static_cast<int>(X.rows());
    p.order.resize(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
        auto& ord = p.order[static_cast<std::size_t>(f)];
        ord.resize(static_cast<std::size_t>(n));
        std::iota(ord.begin(), ord.end(), 0);
        const auto col = X.col(f);
        std::sort(ord.begin(), ord.end(), [&](int a, int b) {
            return col[a] < col[b] || (col[a] == col[b] && a < b);
        });
    }
    return p;
}

Vector normalized_importance(const std::vector<double>& decrease) {
    Vector v = Eigen::Map<const Vector>(decrease.data(), static_cast<Eigen::Index>(decrease.size()));
    v = v.cwiseMax(0.0);
    const double total = v.sum();
    if (total > 0.0) v /= total;
    return v;
}

/// Node statistics: weighted class counts or weighted moments of a regression target.
struct NodeStats {
    std::vector<double> counts;  // classification
    double w = 0.0;
    double wy = 0.0;
    double wyy = 0.0;
    std::size_t n = 0;  // distinct rows
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, const TreeTargets& targets, const std::vector<double>& weights,
                const TreeParams& params, Rng& rng)
        : X_(X), targets_(targets), weights_(weights), params_(params), rng_(rng) {
        regression_ = targets.values != nullptr;
        if (regression_ && params.criterion != Criterion::squared_error) {
            throw ConfigError("regression trees use the squared_error criterion");
        }
        if (!regression_ && params.criterion == Criterion::squared_error) {
            throw ConfigError("classification trees use gini or entropy");
        }
        K_ = regression_ ? 1 : static_cast<std::size_t>(targets.n_classes);
        F_ = static_cast<std::size_t>(X.cols());
        tree_.value_dim_ = K_;
        tree_.importance_.assign(F_, 0.0);
    }

    Tree build(const Presort* presort) {
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            if (weights_[i] > 0.0) samples_.push_back(static_cast<int>(i));
        }
        if (samples_.empty()) throw DegenerateError("tree has no training rows");

        const bool all_features = params_.max_features <= 0 ||
                                  static_cast<std::size_t>(params_.max_features) >= F_;
        presorted_ = all_features && params_.splitter == Splitter::best;
        if (presorted_) {
            Presort local;
            if (!presort) {
                local = presort_columns(X_);
                presort = &local;
            }
            sorted_.resize(F_);
            for (std::size_t f = 0; f < F_; ++f) {
                auto& dst = sorted_[f];
                dst.reserve(samples_.size());
                for (int r : presort->order[f])
                    if (weights_[static_cast<std::size_t>(r)] > 0.0) dst.push_back(r);
            }
        }
        goes_left_.assign(static_cast<std::size_t>(X_.rows()), 0);

        struct Pending {
            std::size_t start, end;
            int depth;
            int node;
        };
        std::vector<Pending> stack;
        stack.push_back({0, samples_.size(), 0, new_node()});
        while (!stack.empty()) {
            const Pending p = stack.back();
            stack.pop_back();
            const NodeStats stats = stats_of(p.start, p.end);
            store_value(p.node, stats);

            const double imp = impurity(stats);
            const bool can_split =
                (params_.max_depth <= 0 || p.depth < params_.max_depth) &&
                stats.n >= static_cast<std::size_t>(std::max(2, params_.min_samples_split)) &&
                stats.n >= 2 * static_cast<std::size_t>(std::max(1, params_.min_samples_leaf)) &&
                imp > 1e-12;
            if (!can_split) continue;

            const Split split = find_split(p.start, p.end, stats, imp);
            if (split.feature < 0) continue;

            const std::size_t mid = partition(p.start, p.end, split);
            tree_.importance_[static_cast<std::size_t>(split.feature)] += split.improvement;
            const int left = new_node();
            const int right = new_node();
            auto& node = tree_.nodes_[static_cast<std::size_t>(p.node)];
            node.feature = split.feature;
            node.threshold = split.threshold;
            node.left = left;
            node.right = right;
            // Right pushed first so the left subtree is grown first.
            stack.push_back({mid, p.end, p.depth + 1, right});
            stack.push_back({p.start, mid, p.depth + 1, left});
        }
        return std::move(tree_);
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double improvement = -std::numeric_limits<double>::infinity();
    };

    int new_node() {
        tree_.nodes_.emplace_back();
        tree_.values_.resize(tree_.values_.size() + K_, 0.0);
        return static_cast<int>(tree_.nodes_.size() - 1);
    }

    double w(int r) const { return weights_[static_cast<std::size_t>(r)]; }

    void add(NodeStats& s, int r) const {
        const double wr = w(r);
        s.w += wr;
        ++s.n;
        if (regression_) {
            const double y = (*targets_.values)[static_cast<std::size_t>(r)];
            s.wy += wr * y;
            s.wyy += wr * y * y;
        } else {
            s.counts[static_cast<std::size_t>((*targets_.classes)[static_cast<std::size_t>(r)])] += wr;
        }
    }

    NodeStats empty_stats() const {
        NodeStats s;
        if (!regression_) s.counts.assign(K_, 0.0);
        return s;
    }

    NodeStats stats_of(std::size_t start, std::size_t end) const {
        NodeStats s = empty_stats();
        for (std::size_t i = start; i < end; ++i) add(s, samples_[i]);
        return s;
    }

    double impurity(const NodeStats& s) const {
        if (s.w <= 0.0) return 0.0;
        if (regression_) return std::max(0.0, s.wyy / s.w - (s.wy / s.w) * (s.wy / s.w));
        double acc = 0.0;
        if (params_.criterion == Criterion::gini) {
            for (double c : s.counts) acc += (c / s.w) * (c / s.w);
            return 1.0 - acc;
        }
        for (double c : s.counts) {
            if (c > 0.0) {
                const double p = c / s.w;
                acc -= p * std::log2(p);
            }
        }
        return acc;
    }

    NodeStats subtract(const NodeStats& parent, const NodeStats& left) const {
        NodeStats r = parent;
        r.w -= left.w;
        r.n -= left.n;
        r.wy -= left.wy;
        r.wyy -= left.wyy;
        for (std::size_t k = 0; k < r.counts.size(); ++k) r.counts[k] -= left.counts[k];
        return r;
    }

    void store_value(int node, const NodeStats& s) {
        std::vector<double> v(K_, 0.0);
        if (regression_) {
            v[0] = s.w > 0.0 ? s.wy / s.w : 0.0;
        } else if (s.w > 0.0) {
            for (std::size_t k = 0; k < K_; ++k) v[k] = s.counts[k] / s.w;
        }
        tree_.set_value(node, v);
    }

    std::vector<int> candidate_features() {
        std::vector<int> feats;
        const bool all = params_.max_features <= 0 ||
                         static_cast<std::size_t>(params_.max_features) >= F_;
        if (all) {
            feats.resize(F_);
            std::iota(feats.begin(), feats.end(), 0);
        } else {
            for (std::size_t f : rng_.sample_without_replacement(
                     F_, static_cast<std::size_t>(params_.max_features))) {
                feats.push_back(static_cast<int>(f));
            }
            std::sort(feats.begin(), feats.end());
        }
        return feats;
    }

    double children_improvement(const NodeStats& parent, double parent_imp, const NodeStats& left) const {
        const NodeStats right = subtract(parent, left);
        return parent.w * parent_imp - left.w * impurity(left) - right.w * impurity(right);
    }

    Split find_split(std::size_t start, std::size_t end, const NodeStats& parent, double parent_imp) {
        Split best;
        const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));
        const std::size_t n = end - start;

        if (params_.splitter == Splitter::random) {
            for (int f : candidate_features()) {
                double lo = std::numeric_limits<double>::infinity();
                double hi = -lo;
                for (std::size_t i = start; i < end; ++i) {
                    const double x = X_(samples_[i], f);
                    lo = std::min(lo, x);
                    hi = std::max(hi, x);
                }
                if (!(hi > lo)) continue;
                double thr = lo + rng_.uniform() * (hi - lo);
                if (thr >= hi) thr = lo;
                NodeStats left = empty_stats();
                for (std::size_t i = start; i < end; ++i) {
                    if (X_(samples_[i], f) <= thr) add(left, samples_[i]);
                }
                if (left.n < min_leaf || n - left.n < min_leaf) continue;
                const double gain = children_improvement(parent, parent_imp, left);
                if (gain > best.improvement) best = {f, thr, gain};
            }
            return best;
        }

        std::vector<std::pair<double, int>> buf;
        for (int f : candidate_features()) {
            const int* ord;
            if (presorted_) {
                ord = sorted_[static_cast<std::size_t>(f)].data() + start;
            } else {
                buf.clear();
                for (std::size_t i = start; i < end; ++i) buf.emplace_back(X_(samples_[i], f), samples_[i]);
                std::sort(buf.begin(), buf.end());
                order_buf_.resize(n);
                for (std::size_t i = 0; i < n; ++i) order_buf_[i] = buf[i].second;
                ord = order_buf_.data();
            }
            NodeStats left = empty_stats();
            for (std::size_t i = 0; i + 1 < n; ++i) {
                add(left, ord[i]);
                const double x = X_(ord[i], f);
                const double x_next = X_(ord[i + 1], f);
                if (!(x_next > x)) continue;
                if (left.n < min_leaf) continue;
                if (n - left.n < min_leaf) break;
                const double gain = children_improvement(parent, parent_imp, left);
                if (gain > best.improvement) {
                    double thr = x + (x_next - x) / 2.0;
                    if (!(thr < x_next)) thr = x;
                    best = {f, thr, gain};
                }
            }
        }
        return best;
    }

    std::size_t partition(std::size_t start, std::size_t end, const Split& split) {
        std::size_t n_left = 0;
        for (std::size_t i = start; i < end; ++i) {
            const int r = samples_[i];
            const bool left = X_(r, split.feature) <= split.threshold;
            goes_left_[static_cast<std::size_t>(r)] = left ? 1 : 0;
            n_left += left ? 1 : 0;
        }
        auto stable = [&](std::vector<int>& v) {
            tmp_.clear();
            std::size_t out = start;
            for (std::size_t i = start; i < end; ++i) {
                if (goes_left_[static_cast<std::size_t>(v[i])]) v[out++] = v[i];
                else tmp_.push_back(v[i]);
            }
            std::copy(tmp_.begin(), tmp_.end(), v.begin() + static_cast<std::ptrdiff_t>(out));
        };
        stable(samples_);
        if (presorted_) {
            for (auto& s : sorted_) stable(s);
        }
        return start + n_left;
    }

    const Matrix& X_;
    const TreeTargets& targets_;
    const std::vector<double>& weights_;
    const TreeParams& params_;
    Rng& rng_;
    bool regression_ = false;
    std::size_t K_ = 1;
    std::size_t F_ = 0;
    bool presorted_ = false;
    std::vector<int> samples_;
    std::vector<std::vector<int>> sorted_;
    std::vector<char> goes_left_;
    std::vector<int> tmp_;
    std::vector<int> order_buf_;
    Tree tree_;
};

Tree build_tree(const Matrix& X, const TreeTargets& targets, const std::vector<double>& weights,
                const TreeParams& params, Rng& rng, const Presort* presort) {
    if (weights.size() != static_cast<std::size_t>(X.rows())) {
        throw ShapeError("tree weights do not match rows");
    }
    TreeBuilder builder(X, targets, weights, params, rng);
    return builder.build(presort);
}

}  // namespace spectrabench
