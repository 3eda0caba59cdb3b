#include "spectrabench/models/model.hpp"

#include "spectrabench/error.hpp"
#include "spectrabench/models/forest.hpp"
#include "spectrabench/models/linear.hpp"
#include "spectrabench/models/neighbors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace spectrabench {

std::int64_t param_int(const ParamMap& p, const std::string& key, std::int64_t fallback) {
    const auto it = p.find(key);
    if (it == p.end()) return fallback;
    if (const auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
    if (const auto* d = std::get_if<double>(&it->second)) {
        if (std::isfinite(*d) && std::floor(*d) == *d) return static_cast<std::int64_t>(*d);
    }
    throw ConfigError("hyperparameter " + key + " must be an integer");
}

double param_real(const ParamMap& p, const std::string& key, double fallback) {
    const auto it = p.find(key);
    if (it == p.end()) return fallback;
    if (const auto* d = std::get_if<double>(&it->second)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
    throw ConfigError("hyperparameter " + key + " must be a number");
}

std::string param_str(const ParamMap& p, const std::string& key, const std::string& fallback) {
    const auto it = p.find(key);
    if (it == p.end()) return fallback;
    if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
    throw ConfigError("hyperparameter " + key + " must be a string");
}

namespace {

Categorical choices(std::initializer_list<const char*> names) {
    Categorical c;
    for (const char* n : names) c.choices.emplace_back(std::string(n));
    return c;
}

template <typename T>
std::function<std::unique_ptr<Estimator>()> make() {
    return [] { return std::make_unique<T>(); };
}

SearchSpace tree_space() {
    SearchSpace s;
    s.params["max_depth"] = IntRange{3, 30};
    s.params["min_samples_split"] = IntRange{2, 20};
    s.params["min_samples_leaf"] = IntRange{1, 20};
    s.params["criterion"] = choices({"gini", "entropy"});
    return s;
}

void register_builtins(ModelRegistry& r) {
    const std::vector<std::string> tree_params{"criterion", "max_depth", "min_samples_split",
                                               "min_samples_leaf", "class_weight"};
    auto with = [](std::vector<std::string> base, std::initializer_list<const char*> extra) {
        for (const char* e : extra) base.emplace_back(e);
        return base;
    };

    {
        r.add({"decision_tree", make<DecisionTreeModel>(), tree_params, tree_space(), true});
    }
    {
        auto s = tree_space();
        s.params["n_estimators"] = IntRange{50, 500};
        s.params["max_features"] = choices({"sqrt", "log2", "all"});
        r.add({"random_forest", make<RandomForestModel>(),
               with(tree_params, {"n_estimators", "max_features"}), s, true});
    }
    {
        auto s = tree_space();
        s.params["n_estimators"] = IntRange{50, 500};
        r.add({"extra_trees", make<ExtraTreesModel>(),
               with(tree_params, {"n_estimators", "max_features"}), s, true});
    }
    {
        SearchSpace s;
        s.params["n_estimators"] = IntRange{50, 500};
        s.params["learning_rate"] = RealRange{0.01, 0.3};
        s.params["max_depth"] = IntRange{3, 10};
        s.params["min_samples_split"] = IntRange{2, 20};
        s.params["min_samples_leaf"] = IntRange{1, 20};
        r.add({"gradient_boosting", make<GradientBoostingModel>(),
               {"n_estimators", "learning_rate", "max_depth", "min_samples_split", "min_samples_leaf"}, s,
               true});
    }
    {
        SearchSpace s;
        s.params["n_neighbors"] = IntRange{3, 50};
        s.params["weights"] = choices({"uniform", "distance"});
        s.params["p"] = Categorical{{std::int64_t{1}, std::int64_t{2}}};
        r.add({"knn", make<KnnModel>(), {"n_neighbors", "weights", "p"}, s, false});
    }
    {
        SearchSpace s;
        s.params["var_smoothing"] = RealRange{1e-10, 1e-6, true};
        r.add({"gaussian_nb", make<GaussianNbModel>(), {"var_smoothing"}, s, false});
    }
    {
        SearchSpace s;
        s.params["C"] = RealRange{0.01, 100.0, true};
        s.params["penalty"] = choices({"l1", "l2"});
        r.add({"logistic_regression", make<LogisticRegressionModel>(),
               {"C", "penalty", "max_iter", "class_weight"}, s, false});
    }
    {
        SearchSpace s;
        s.params["alpha"] = RealRange{0.1, 100.0, true};
        s.params["solver"] = choices({"auto", "svd", "cholesky"});
        r.add({"ridge", make<RidgeModel>(), {"alpha", "solver", "class_weight"}, s, false});
    }
    {
        SearchSpace s;
        s.params["n_components"] = IntRange{1, 30};
        r.add({"plsda", make<PlsDaModel>(), {"n_components"}, s, false});
    }
}

}  // namespace

ModelRegistry& ModelRegistry::global() {
    static ModelRegistry* registry = [] {
        auto* r = new ModelRegistry();
        register_builtins(*r);
        return r;
    }();
    return *registry;
}

void ModelRegistry::add(ModelInfo info) {
    if (info.name.empty() || !info.factory) throw ConfigError("model registration needs a name and a factory");
    info.space.validate();
    std::lock_guard lock(mutex_);
    for (const auto& m : models_) {
        if (m->name == info.name) throw ConfigError("model already registered: " + info.name);
    }
    models_.push_back(std::make_unique<ModelInfo>(std::move(info)));
}

bool ModelRegistry::contains(const std::string& name) const {
    std::lock_guard lock(mutex_);
    return std::any_of(models_.begin(), models_.end(), [&](const auto& m) { return m->name == name; });
}

const ModelInfo& ModelRegistry::get(const std::string& name) const {
    std::lock_guard lock(mutex_);
    for (const auto& m : models_) {
        if (m->name == name) return *m;
    }
    throw ConfigError("unknown model: " + name);
}

std::vector<std::string> ModelRegistry::names() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& m : models_) out.push_back(m->name);
    return out;
}

const std::vector<std::string>& builtin_model_names() {
    static const std::vector<std::string> names{
        "decision_tree", "random_forest", "extra_trees", "gradient_boosting", "knn",
        "gaussian_nb",   "logistic_regression", "ridge", "plsda"};
    return names;
}

int argmax_row(const Matrix& P, Eigen::Index row) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < P.cols(); ++k) {
        if (P(row, k) > P(row, best)) best = k;
    }
    return static_cast<int>(best);
}

Matrix softmax_rows(const Matrix& scores) {
    Matrix P(scores.rows(), scores.cols());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const double m = scores.row(i).maxCoeff();
        P.row(i) = (scores.row(i).array() - m).exp().matrix();
        P.row(i) /= P.row(i).sum();
    }
    return P;
}

void save_params(ByteWriter& out, const ParamMap& p) {
    out.u64(p.size());
    for (const auto& [key, value] : p) {
        out.str(key);
        out.u8(static_cast<std::uint8_t>(value.index()));
        if (const auto* i = std::get_if<std::int64_t>(&value)) {
            out.i64(*i);
        } else if (const auto* d = std::get_if<double>(&value)) {
            out.f64(*d);
        } else {
            out.str(std::get<std::string>(value));
        }
    }
}

ParamMap load_params(ByteReader& in) {
    ParamMap p;
    const auto n = in.u64();
    for (std::uint64_t i = 0; i < n; ++i) {
        auto key = in.str();
        switch (in.u8()) {
            case 0: p[key] = in.i64(); break;
            case 1: p[key] = in.f64(); break;
            case 2: p[key] = in.str(); break;
            default: throw ParseError("bad parameter tag in artifact");
        }
    }
    return p;
}

namespace {

void check_features(const Matrix& X, std::size_t n_features) {
    if (static_cast<std::size_t>(X.cols()) != n_features) {
        throw ShapeError("expected " + std::to_string(n_features) + " features, got " +
                         std::to_string(X.cols()));
    }
    if (!X.allFinite()) throw DomainError("non-finite value in feature matrix");
}

constexpr std::uint32_t kModelVersion = 1;

}  // namespace

Matrix FittedModel::predict_proba(const Matrix& X) const {
    check_features(X, n_features_);
    return estimator_->predict_proba(X);
}

Labels FittedModel::predict(const Matrix& X) const {
    const Matrix P = predict_proba(X);
    Labels out(static_cast<std::size_t>(P.rows()));
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = classes_[static_cast<std::size_t>(argmax_row(P, i))];
    }
    return out;
}

void FittedModel::save(ByteWriter& out) const {
    out.magic("SBM1");
    out.u32(kModelVersion);
    out.str(spec_.name);
    save_params(out, spec_.hyperparams);
    out.u64(spec_.seed);
    out.ints(classes_);
    out.u64(n_features_);
    out.f64(train_time_s_);
    estimator_->save(out);
}

FittedModel FittedModel::load(ByteReader& in) {
    in.expect_magic("SBM1");
    if (in.u32() != kModelVersion) throw ParseError("unsupported model artifact version");
    FittedModel m;
    m.spec_.name = in.str();
    m.spec_.hyperparams = load_params(in);
    m.spec_.seed = in.u64();
    m.classes_ = in.ints();
    m.n_features_ = in.u64();
    m.train_time_s_ = in.f64();
    auto est = ModelRegistry::global().get(m.spec_.name).factory();
    est->configure(m.spec_.hyperparams, m.spec_.seed);
    est->load(in);
    m.estimator_ = std::move(est);
    ByteWriter sizer;
    m.save(sizer);
    m.model_size_bytes_ = sizer.bytes().size();
    return m;
}

FittedModel fit_model(const ModelSpec& spec, const Matrix& X, const Labels& y) {
    const auto& info = ModelRegistry::global().get(spec.name);
    for (const auto& [key, value] : spec.hyperparams) {
        if (std::find(info.param_names.begin(), info.param_names.end(), key) == info.param_names.end()) {
            throw ConfigError("model " + spec.name + " has no hyperparameter '" + key + "'");
        }
    }
    if (static_cast<std::size_t>(X.rows()) != y.size()) {
        throw ShapeError("feature matrix has " + std::to_string(X.rows()) + " rows but " +
                         std::to_string(y.size()) + " labels");
    }
    if (X.cols() == 0) throw ShapeError("feature matrix has no columns");
    if (!X.allFinite()) throw DomainError("non-finite value in feature matrix");

    FittedModel m;
    m.spec_ = spec;
    m.classes_ = unique_labels(y);
    if (m.classes_.size() < 2) throw DegenerateError("training labels contain a single class");
    m.n_features_ = static_cast<std::size_t>(X.cols());

    std::vector<int> idx(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        idx[i] = static_cast<int>(std::lower_bound(m.classes_.begin(), m.classes_.end(), y[i]) -
                                  m.classes_.begin());
    }
    auto est = info.factory();
    est->configure(spec.hyperparams, spec.seed);
    const auto t0 = std::chrono::steady_clock::now();
    est->fit(X, idx, static_cast<int>(m.classes_.size()));
    m.train_time_s_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    m.estimator_ = std::move(est);

    ByteWriter sizer;
    m.save(sizer);
    m.model_size_bytes_ = sizer.bytes().size();
    return m;
}

}  // namespace spectrabench
