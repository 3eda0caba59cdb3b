#pragma once

#include "spectrabench/evaluate.hpp"
#include "spectrabench/pipeline.hpp"
#include "spectrabench/search_space.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace spectrabench {

struct TrialRecord {
    ParamMap params;
    double objective = 0.0;
    int trial_index = 0;
    double duration_s = 0.0;
    std::string error;  // non-empty when the trial failed and scored 0
};

struct TpeSettings {
    int n_startup = 10;
    double gamma = 0.25;
    int n_candidates = 24;
};

/// Next point to evaluate. Uniform (log-uniform on log domains) during startup; after
/// that, the best ceil(γ·n) trials form the good set, and of n_candidates joint draws
/// from the good-set Parzen densities l the one maximizing Σ log l − log g is returned.
/// Deterministic per (seed, trial_index).
ParamMap suggest(const std::vector<TrialRecord>& history, const SearchSpace& space, std::uint64_t seed,
                 int trial_index, const TpeSettings& settings = {});

/// Uniform draw from the space.
ParamMap sample_uniform(const SearchSpace& space, std::uint64_t seed);

struct StudyResult {
    ParamMap best_params;
    double best_objective = 0.0;
    int best_trial = -1;
    std::vector<TrialRecord> history;
};

using Objective = std::function<double(const ParamMap&)>;

/// Sequential TPE study maximizing the objective. A trial that throws scores 0.
StudyResult run_study(const Objective& objective, const SearchSpace& space, int n_trials, std::uint64_t seed,
                      const TpeSettings& settings = {});

/// Stratified (on ripeness) 70/30 split of row indices, deterministic per seed.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(const Labels& y, double train_fraction,
                                                                            std::uint64_t seed);

/// Mean macro-F1 of both task pipelines fit on the 70% part and scored on the 30% part.
double holdout_objective(const PipelineConfig& cfg, const LabeledFeatures& train, std::uint64_t seed);

struct OptimizeResult {
    StudyResult study;
    PipelineConfig best_config;
    PairedPipeline final_model;  // refit on all of train with the best parameters
};

/// TPE over the model's hyperparameters. Tuned values override base.model.hyperparams.
OptimizeResult optimize(const PipelineConfig& base, const SearchSpace& space, const LabeledFeatures& train,
                        int n_trials, std::uint64_t seed, const TpeSettings& settings = {});

}  // namespace spectrabench
