#pragma once

#include "spectrabench/balance.hpp"
#include "spectrabench/dataset.hpp"
#include "spectrabench/ensemble.hpp"
#include "spectrabench/explain.hpp"
#include "spectrabench/transforms.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spectrabench::cli {

using nlohmann::json;

struct ExplainOptions {
    std::string model = "extra_trees";
    std::string source = "impurity";  // or "permutation"
    ImportanceMetric metric = ImportanceMetric::accuracy;
    int n_repeats = 10;
    double cutoff_nm = 700.0;
    std::size_t top_n = 3;
    int window = 5;
};

struct EnsembleOptions {
    std::vector<EnsembleKind> kinds{EnsembleKind::hard_vote, EnsembleKind::soft_vote, EnsembleKind::stacking,
                                    EnsembleKind::blending};
    std::size_t top = 5;
    int oof_folds = 5;
    double holdout_frac = 0.2;
    std::string meta = "logistic_regression";
};

/// How the stratified resplit picks per-fruit training counts.
enum class ResplitMode { balanced, reference, explicit_counts };

struct RunConfig {
    std::filesystem::path table;
    std::filesystem::path manifest;
    std::optional<SynthSpec> synth;
    std::uint64_t synth_seed = 42;

    std::uint64_t global_seed = 42;
    std::vector<std::string> models;
    std::vector<BalanceKind> balance;
    std::vector<bool> pca{false, true};
    double pca_variance = 0.95;
    int n_trials = 100;
    int cv_k = 10;
    ResplitMode resplit_mode = ResplitMode::balanced;
    std::map<std::string, std::size_t> resplit_counts;
    EnsembleOptions ensemble;
    ExplainOptions explain;
    std::string select_on = "test";  // or "validation"
    std::vector<BandSubset> band_subsets;
    SubsetMode subset_mode = SubsetMode::subset_then_transform;
    std::optional<std::pair<BalanceKind, bool>> bands_preprocessing;
    int bootstrap_resamples = 10000;

    /// Normalized view of every setting; its hash identifies the run.
    json canonical() const;
    std::string hash() const;
};

/// Strict parser: unknown keys and bad values raise ConfigError. Relative dataset
/// paths resolve against base_dir.
RunConfig parse_config(const json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

void apply_overrides(RunConfig& cfg, std::optional<std::uint64_t> seed,
                     const std::optional<std::vector<std::string>>& models);

}  // namespace spectrabench::cli
