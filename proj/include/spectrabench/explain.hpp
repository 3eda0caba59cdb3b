#pragma once

#include "spectrabench/dataset.hpp"
#include "spectrabench/evaluate.hpp"
#include "spectrabench/pipeline.hpp"
#include "spectrabench/transforms.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace spectrabench {

enum class ImportanceMetric { accuracy, f1_macro };

ImportanceMetric parse_importance_metric(const std::string& name);

/// importance[f] = baseline metric − mean metric over repeats with column f shuffled.
/// Throws DomainError for empty X.
Vector permutation_importance(const FittedPipeline& model, const Matrix& X, const Labels& y,
                              ImportanceMetric metric, int n_repeats, std::uint64_t seed);

/// Sums each band's entries across transform blocks. Throws ShapeError when the map and
/// the vector disagree in length or a band index is out of range.
Vector band_importance(const Vector& feature_importance, const GroupMap& map, std::size_t band_count);

struct ConsensusSelection {
    std::vector<std::size_t> band_indices;  // ascending
    std::vector<double> wavelengths_nm;
    std::vector<int> joint_ranks;
};

/// Ranks bands per task (1 = most important, ties to the lower band index), adds the two
/// ranks and keeps the top_n lowest joint ranks among bands below the cutoff.
/// Throws CapacityError when fewer than top_n bands lie below the cutoff.
ConsensusSelection consensus_bands(const Vector& ripeness_importance, const Vector& firmness_importance,
                                   const WavelengthGrid& grid, double wavelength_cutoff_nm = 700.0,
                                   std::size_t top_n = 3);

/// Centered moving mean and population std; windows shrink at the edges.
/// Throws DomainError for an even or non-positive window.
std::pair<Vector, Vector> rolling_band_importance(const Vector& per_band, int window = 5);

struct GroupDrop {
    TransformId group = TransformId::raw;
    double drop_ripeness = 0.0;  // percent of the full-feature accuracy
    double drop_firmness = 0.0;
    double drop_overall = 0.0;
};

/// Retrains without each transform block on the same split and seed and reports the
/// relative accuracy drop in percent (negative when removal helps).
std::vector<GroupDrop> group_ablation(const PipelineConfig& cfg, const LabeledFeatures& train,
                                      const LabeledFeatures& test, const GroupMap& map);

}  // namespace spectrabench
