#pragma once

#include "spectrabench/linalg.hpp"
#include "spectrabench/rng.hpp"
#include "spectrabench/serialize.hpp"

#include <span>
#include <string>
#include <vector>

namespace spectrabench {

enum class Criterion { gini, entropy, squared_error };
enum class Splitter { best, random };

Criterion parse_criterion(const std::string& name);

struct TreeParams {
    Criterion criterion = Criterion::gini;
    int max_depth = 0;  // 0 = unlimited
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    int max_features = 0;  // candidate features per node; 0 = all
    Splitter splitter = Splitter::best;
};

/// Binary decision tree. Internal nodes send x[feature] <= threshold left.
/// Each node stores a value vector: class distribution (classification) or
/// a single prediction (regression).
class Tree {
public:
    struct Node {
        int feature = -1;
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        bool is_leaf() const { return feature < 0; }
    };

    int apply(const Matrix& X, Eigen::Index row) const;
    std::span<const double> value(int node) const {
        return {values_.data() + static_cast<std::size_t>(node) * value_dim_, value_dim_};
    }
    void set_value(int node, std::span<const double> v);

    const std::vector<Node>& nodes() const { return nodes_; }
    std::size_t value_dim() const { return value_dim_; }
    /// Unnormalized weighted impurity decrease per feature.
    const std::vector<double>& impurity_decrease() const { return importance_; }
    int depth() const;

    void save(ByteWriter& out) const;
    void load(ByteReader& in);

private:
    friend class TreeBuilder;

    std::vector<Node> nodes_;
    std::vector<double> values_;
    std::size_t value_dim_ = 1;
    std::vector<double> importance_;
};

/// Per-feature row order by (value, row index), shared by trees grown on the same X.
struct Presort {
    std::vector<std::vector<int>> order;
};

Presort presort_columns(const Matrix& X);

struct TreeTargets {
    const std::vector<int>* classes = nullptr;  // classification labels 0..n_classes-1
    int n_classes = 0;
    const std::vector<double>* values = nullptr;  // regression targets
};

/// Grows one tree. Rows with weight 0 are excluded. With the best splitter every
/// threshold between consecutive distinct values of each candidate feature is
/// scanned (ties → lowest feature index, then lowest threshold); with the random
/// splitter one uniform threshold per candidate feature is drawn in the node's range.
/// `presort` is used when all features are candidates and the splitter is best.
Tree build_tree(const Matrix& X, const TreeTargets& targets, const std::vector<double>& weights,
                const TreeParams& params, Rng& rng, const Presort* presort = nullptr);

/// Importance normalized to sum 1 (all zeros when the tree never split).
Vector normalized_importance(const std::vector<double>& decrease);

}  // namespace spectrabench
