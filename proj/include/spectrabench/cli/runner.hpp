#pragma once

#include "spectrabench/cli/config.hpp"
#include "spectrabench/cli/report.hpp"
#include "spectrabench/evaluate.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spectrabench::cli {

struct RunOptions {
    std::filesystem::path out;
    /// Reuse fitted artifacts and finished studies from <out>/cache.
    bool resume = false;
    bool markdown = false;
};

/// Drives the benchmark phases over one dataset. A phase that needs an earlier one
/// reuses its document from the output directory when the config hash matches and
/// runs it otherwise.
class Runner {
public:
    Runner(RunConfig cfg, RunOptions opts);

    static const std::vector<std::string>& phases();

    /// Runs the phase, writes its report and returns the document.
    json run(const std::string& phase);

    const RunConfig& config() const { return cfg_; }
    const Dataset& dataset();

private:
    struct TrainTest {
        LabeledFeatures train;
        LabeledFeatures test;
    };

    Report phase1();
    Report phase2();
    Report phase3();
    Report phase4();
    Report phase5();
    Report phase6();
    Report bands();
    Report synth();
    Report validate();

    json ensure(const std::string& phase);
    std::optional<json> existing(const std::string& phase) const;

    const FeatureTable& features(const std::optional<BandSubset>& subset);
    TrainTest split(BalanceKind kind, const std::optional<BandSubset>& subset = std::nullopt);
    std::map<std::string, std::size_t> resplit_counts();
    PairedPipeline fit_cached(const std::string& unit, const PipelineConfig& cfg, const LabeledFeatures& train,
                              double* seconds = nullptr);
    ParamMap tuned_params(const json& phase3_doc, const std::string& model) const;

    RunConfig cfg_;
    RunOptions opts_;
    std::string hash_;
    std::optional<Dataset> data_;
    std::map<std::string, FeatureTable> features_;
};

json to_json(const ParamValue& v);
json to_json(const ParamMap& p);
ParamMap params_from_json(const json& j);
json metrics_json(const PairedMetrics& m);

}  // namespace spectrabench::cli
