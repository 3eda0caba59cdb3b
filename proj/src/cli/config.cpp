#include "spectrabench/cli/config.hpp"

#include "spectrabench/error.hpp"
#include "spectrabench/models/model.hpp"
#include "spectrabench/rng.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace spectrabench::cli {

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
    }
}

template <typename T>
T get(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
    }
}

std::uint64_t get_seed(const json& j, const std::string& key, std::uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError("'" + key + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

BandSubset parse_subset(const json& j) {
    if (j.is_string()) return BandSubset::preset(j.get<std::string>());
    check_keys(j, "band subset", {"name", "indices"});
    BandSubset s{get<std::string>(j, "name", "custom"), get<std::vector<std::size_t>>(j, "indices", {})};
    if (s.indices.empty()) throw ConfigError("band subset '" + s.name + "' has no indices");
    return s;
}

SubsetMode parse_subset_mode(const std::string& s) {
    if (s == "subset_then_transform") return SubsetMode::subset_then_transform;
    if (s == "transform_then_subset") return SubsetMode::transform_then_subset;
    throw ConfigError("unknown subset mode: " + s);
}

std::string to_string(SubsetMode m) {
    return m == SubsetMode::subset_then_transform ? "subset_then_transform" : "transform_then_subset";
}

std::string to_string(ImportanceMetric m) { return m == ImportanceMetric::accuracy ? "accuracy" : "f1_macro"; }

}  // namespace

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
    check_keys(j, "config", {"dataset", "synth", "global_seed", "models", "balance", "pca", "pca_variance", "n_trials",
                             "cv_k", "resplit_counts", "ensemble", "explain", "select_on", "bands",
                             "bootstrap_resamples"});
    RunConfig c;
    if (j.contains("dataset") == j.contains("synth")) throw ConfigError("config needs exactly one of 'dataset' or 'synth'");
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        check_keys(d, "dataset", {"table", "manifest"});
        if (!d.contains("table") || !d.contains("manifest")) throw ConfigError("dataset needs 'table' and 'manifest'");
        c.table = base_dir / get<std::string>(d, "table", "");
        c.manifest = base_dir / get<std::string>(d, "manifest", "");
    } else {
        const auto& s = j.at("synth");
        check_keys(s, "synth", {"seed", "per_class", "band_count", "first_nm", "last_nm", "separation", "noise_sd",
                                "test_fraction", "unknown_fraction"});
        SynthSpec spec;
        c.synth_seed = get_seed(s, "seed", 42);
        if (s.contains("per_class")) {
            const auto counts = get<std::vector<std::size_t>>(s, "per_class", {});
            if (counts.size() != 3) throw ConfigError("synth.per_class needs 3 counts");
            spec.per_class_counts = {{Ripeness::unripe, counts[0]}, {Ripeness::perfect, counts[1]},
                                     {Ripeness::overripe, counts[2]}};
        }
        spec.band_count = get<std::size_t>(s, "band_count", spec.band_count);
        spec.first_nm = get<double>(s, "first_nm", spec.first_nm);
        spec.last_nm = get<double>(s, "last_nm", spec.last_nm);
        spec.separation = get<double>(s, "separation", spec.separation);
        spec.noise_sd = get<double>(s, "noise_sd", spec.noise_sd);
        spec.test_fraction = get<double>(s, "test_fraction", spec.test_fraction);
        spec.unknown_fraction = get<double>(s, "unknown_fraction", spec.unknown_fraction);
        c.synth = spec;
    }

    c.global_seed = get_seed(j, "global_seed", 42);
    c.models = get<std::vector<std::string>>(j, "models", builtin_model_names());
    if (c.models.empty()) throw ConfigError("models must not be empty");
    for (const auto& m : c.models) ModelRegistry::global().get(m);

    if (j.contains("balance")) {
        for (const auto& b : get<std::vector<std::string>>(j, "balance", {})) c.balance.push_back(parse_balance_kind(b));
    } else {
        c.balance = {BalanceKind::original, BalanceKind::stratified_resplit, BalanceKind::smote, BalanceKind::oversample,
                     BalanceKind::undersample};
    }
    if (c.balance.empty()) throw ConfigError("balance must not be empty");
    c.pca = get<std::vector<bool>>(j, "pca", c.pca);
    if (c.pca.empty()) throw ConfigError("pca must not be empty");
    c.pca_variance = get<double>(j, "pca_variance", c.pca_variance);
    if (!(c.pca_variance > 0.0 && c.pca_variance <= 1.0)) throw ConfigError("pca_variance must lie in (0, 1]");
    c.n_trials = get<int>(j, "n_trials", c.n_trials);
    if (c.n_trials < 1) throw ConfigError("n_trials must be >= 1");
    c.cv_k = get<int>(j, "cv_k", c.cv_k);
    if (c.cv_k < 2) throw ConfigError("cv_k must be >= 2");
    c.bootstrap_resamples = get<int>(j, "bootstrap_resamples", c.bootstrap_resamples);
    if (c.bootstrap_resamples < 1) throw ConfigError("bootstrap_resamples must be >= 1");

    if (j.contains("resplit_counts")) {
        const auto& r = j.at("resplit_counts");
        if (r.is_string()) {
            const auto mode = r.get<std::string>();
            if (mode == "reference") c.resplit_mode = ResplitMode::reference;
            else if (mode != "balanced") throw ConfigError("resplit_counts must be 'balanced', 'reference' or an object");
        } else {
            c.resplit_mode = ResplitMode::explicit_counts;
            c.resplit_counts = get<std::map<std::string, std::size_t>>(j, "resplit_counts", {});
        }
    }

    if (j.contains("ensemble")) {
        const auto& e = j.at("ensemble");
        check_keys(e, "ensemble", {"kinds", "top", "oof_folds", "holdout_frac", "meta"});
        if (e.contains("kinds")) {
            c.ensemble.kinds.clear();
            for (const auto& k : get<std::vector<std::string>>(e, "kinds", {})) c.ensemble.kinds.push_back(parse_ensemble_kind(k));
        }
        c.ensemble.top = get<std::size_t>(e, "top", c.ensemble.top);
        c.ensemble.oof_folds = get<int>(e, "oof_folds", c.ensemble.oof_folds);
        c.ensemble.holdout_frac = get<double>(e, "holdout_frac", c.ensemble.holdout_frac);
        c.ensemble.meta = get<std::string>(e, "meta", c.ensemble.meta);
        ModelRegistry::global().get(c.ensemble.meta);
        if (c.ensemble.top < 2) throw ConfigError("ensemble.top must be >= 2");
    }

    if (j.contains("explain")) {
        const auto& e = j.at("explain");
        check_keys(e, "explain", {"model", "source", "metric", "n_repeats", "cutoff_nm", "top_n", "window"});
        c.explain.model = get<std::string>(e, "model", c.explain.model);
        ModelRegistry::global().get(c.explain.model);
        c.explain.source = get<std::string>(e, "source", c.explain.source);
        if (c.explain.source != "impurity" && c.explain.source != "permutation") {
            throw ConfigError("explain.source must be 'impurity' or 'permutation'");
        }
        c.explain.metric = parse_importance_metric(get<std::string>(e, "metric", "accuracy"));
        c.explain.n_repeats = get<int>(e, "n_repeats", c.explain.n_repeats);
        c.explain.cutoff_nm = get<double>(e, "cutoff_nm", c.explain.cutoff_nm);
        c.explain.top_n = get<std::size_t>(e, "top_n", c.explain.top_n);
        c.explain.window = get<int>(e, "window", c.explain.window);
        if (c.explain.window < 1 || c.explain.window % 2 == 0) throw ConfigError("explain.window must be odd and >= 1");
    }

    c.select_on = get<std::string>(j, "select_on", c.select_on);
    if (c.select_on != "test" && c.select_on != "validation") throw ConfigError("select_on must be 'test' or 'validation'");

    if (j.contains("bands")) {
        const auto& b = j.at("bands");
        check_keys(b, "bands", {"subsets", "mode", "balance", "pca"});
        if (b.contains("subsets")) {
            if (!b.at("subsets").is_array()) throw ConfigError("bands.subsets must be an array");
            for (const auto& s : b.at("subsets")) c.band_subsets.push_back(parse_subset(s));
        }
        c.subset_mode = parse_subset_mode(get<std::string>(b, "mode", "subset_then_transform"));
        if (b.contains("balance") || b.contains("pca")) {
            c.bands_preprocessing = std::pair{parse_balance_kind(get<std::string>(b, "balance", "original")),
                                              get<bool>(b, "pca", false)};
        }
    }
    if (c.band_subsets.empty()) c.band_subsets = {BandSubset::preset("vis3"), BandSubset::preset("rgb")};
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(j, path.parent_path());
}

void apply_overrides(RunConfig& cfg, std::optional<std::uint64_t> seed,
                     const std::optional<std::vector<std::string>>& models) {
    if (seed) cfg.global_seed = *seed;
    if (models) {
        if (models->empty()) throw ConfigError("--models needs at least one name");
        for (const auto& m : *models) ModelRegistry::global().get(m);
        cfg.models = *models;
    }
}

json RunConfig::canonical() const {
    json j;
    if (synth) {
        json counts = json::array();
        for (const auto& [r, n] : synth->per_class_counts) counts.push_back(n);
        j["synth"] = {{"seed", synth_seed},
                      {"per_class", counts},
                      {"band_count", synth->band_count},
                      {"first_nm", synth->first_nm},
                      {"last_nm", synth->last_nm},
                      {"separation", synth->separation},
                      {"noise_sd", synth->noise_sd},
                      {"test_fraction", synth->test_fraction},
                      {"unknown_fraction", synth->unknown_fraction}};
    } else {
        // File names only, so moving the data directory keeps the hash.
        j["dataset"] = {{"table", table.filename().string()}, {"manifest", manifest.filename().string()}};
    }
    j["global_seed"] = global_seed;
    j["models"] = models;
    json bal = json::array();
    for (auto b : balance) bal.push_back(to_string(b));
    j["balance"] = bal;
    j["pca"] = pca;
    j["pca_variance"] = pca_variance;
    j["n_trials"] = n_trials;
    j["cv_k"] = cv_k;
    j["bootstrap_resamples"] = bootstrap_resamples;
    switch (resplit_mode) {
        case ResplitMode::balanced: j["resplit_counts"] = "balanced"; break;
        case ResplitMode::reference: j["resplit_counts"] = "reference"; break;
        case ResplitMode::explicit_counts: j["resplit_counts"] = resplit_counts; break;
    }
    json kinds = json::array();
    for (auto k : ensemble.kinds) kinds.push_back(to_string(k));
    j["ensemble"] = {{"kinds", kinds},
                     {"top", ensemble.top},
                     {"oof_folds", ensemble.oof_folds},
                     {"holdout_frac", ensemble.holdout_frac},
                     {"meta", ensemble.meta}};
    j["explain"] = {{"model", explain.model},     {"source", explain.source},
                    {"metric", to_string(explain.metric)}, {"n_repeats", explain.n_repeats},
                    {"cutoff_nm", explain.cutoff_nm}, {"top_n", explain.top_n},
                    {"window", explain.window}};
    j["select_on"] = select_on;
    json subsets = json::array();
    for (const auto& s : band_subsets) subsets.push_back({{"name", s.name}, {"indices", s.indices}});
    j["bands"] = {{"subsets", subsets}, {"mode", to_string(subset_mode)}};
    if (bands_preprocessing) {
        j["bands"]["balance"] = to_string(bands_preprocessing->first);
        j["bands"]["pca"] = bands_preprocessing->second;
    }
    return j;
}

std::string RunConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical().dump())));
    return buf;
}

}  // namespace spectrabench::cli
