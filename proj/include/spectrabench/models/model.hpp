#pragma once

#include "spectrabench/linalg.hpp"
#include "spectrabench/search_space.hpp"
#include "spectrabench/serialize.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace spectrabench {

struct ModelSpec {
    std::string name;
    ParamMap hyperparams;
    std::uint64_t seed = 42;
};

/// Parameter lookups with defaults. Wrong types raise ConfigError.
std::int64_t param_int(const ParamMap& p, const std::string& key, std::int64_t fallback);
double param_real(const ParamMap& p, const std::string& key, double fallback);
std::string param_str(const ParamMap& p, const std::string& key, const std::string& fallback);

/// A learning algorithm working on dense class indices 0..K-1.
///
/// FittedModel maps user labels to indices, so estimators never see raw labels.
class Estimator {
public:
    virtual ~Estimator() = default;

    /// Reads hyperparameters; throws ConfigError on invalid values.
    virtual void configure(const ParamMap& params, std::uint64_t seed) = 0;
    virtual void fit(const Matrix& X, const std::vector<int>& y, int n_classes) = 0;
    /// N×K row-stochastic matrix.
    virtual Matrix predict_proba(const Matrix& X) const = 0;
    virtual std::optional<Vector> feature_importance() const { return std::nullopt; }
    /// False when probabilities are a softmax of decision scores.
    virtual bool calibrated() const { return true; }
    virtual void save(ByteWriter& out) const = 0;
    virtual void load(ByteReader& in) = 0;
};

struct ModelInfo {
    std::string name;
    std::function<std::unique_ptr<Estimator>()> factory;
    /// Hyperparameter names the estimator reads; others are rejected.
    std::vector<std::string> param_names;
    SearchSpace space;
    bool native_importance = false;
};

/// Name → model factory. The nine built-ins are registered on first use;
/// further models can be added at run time.
class ModelRegistry {
public:
    static ModelRegistry& global();

    void add(ModelInfo info);
    bool contains(const std::string& name) const;
    /// Throws ConfigError for unknown names.
    const ModelInfo& get(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    ModelRegistry() = default;

    mutable std::mutex mutex_;
    std::vector<std::unique_ptr<ModelInfo>> models_;
};

/// The nine built-in model names, in registry order.
const std::vector<std::string>& builtin_model_names();

class FittedModel {
public:
    const ModelSpec& spec() const { return spec_; }
    const Labels& classes() const { return classes_; }
    std::size_t n_features() const { return n_features_; }

    /// Labels from classes(); argmax of predict_proba, ties toward the lower class index.
    Labels predict(const Matrix& X) const;
    /// N×K with columns in classes() order.
    Matrix predict_proba(const Matrix& X) const;
    std::optional<Vector> importance() const { return estimator_->feature_importance(); }
    bool calibrated() const { return estimator_->calibrated(); }

    double train_time_s() const { return train_time_s_; }
    std::size_t model_size_bytes() const { return model_size_bytes_; }

    const Estimator& estimator() const { return *estimator_; }

    /// Versioned container: magic "SBM1", u32 version, spec, classes, n_features, payload.
    void save(ByteWriter& out) const;
    static FittedModel load(ByteReader& in);

private:
    friend FittedModel fit_model(const ModelSpec& spec, const Matrix& X, const Labels& y);

    ModelSpec spec_;
    Labels classes_;
    std::size_t n_features_ = 0;
    std::shared_ptr<const Estimator> estimator_;
    double train_time_s_ = 0.0;
    std::size_t model_size_bytes_ = 0;
};

/// Trains the named model. Throws DegenerateError for single-class labels,
/// DomainError for non-finite features, ShapeError for misaligned inputs,
/// ConfigError for unknown models or hyperparameters.
FittedModel fit_model(const ModelSpec& spec, const Matrix& X, const Labels& y);

/// Index of the row maximum, lowest index on ties.
int argmax_row(const Matrix& P, Eigen::Index row);

/// Row-wise softmax.
Matrix softmax_rows(const Matrix& scores);

void save_params(ByteWriter& out, const ParamMap& p);
ParamMap load_params(ByteReader& in);

}  // namespace spectrabench
