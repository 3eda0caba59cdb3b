#pragma once

#include "spectrabench/dataset.hpp"
#include "spectrabench/linalg.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spectrabench {

using Spectrum = std::vector<double>;

/// Spectral representations, in feature-block order.
enum class TransformId : int { raw = 0, d1 = 1, cr = 2, snv = 3, d1cr = 4 };

inline constexpr std::array<TransformId, 5> kTransformOrder{
    TransformId::raw, TransformId::d1, TransformId::cr, TransformId::snv, TransformId::d1cr};

std::string to_string(TransformId t);

/// Per-band arithmetic mean over the foreground rows of a P×B pixel matrix.
/// Throws DomainError when the mask selects no pixel, ShapeError on size mismatch.
Spectrum mean_spectrum(const Matrix& pixels, const std::vector<bool>& foreground);

/// First derivative with respect to wavelength: central differences inside,
/// one-sided differences at both ends, output length = input length (≥ 3).
Spectrum first_derivative(std::span<const double> s, const WavelengthGrid& grid);

/// Upper convex hull of (λ_i, s_i) evaluated at every grid point (the continuum).
Spectrum upper_hull_continuum(std::span<const double> s, const WavelengthGrid& grid);

/// s / continuum. Hull vertices map to exactly 1; where the continuum is ≤ 0 the output is 1.
Spectrum continuum_removal(std::span<const double> s, const WavelengthGrid& grid);

inline constexpr double kSnvEpsilon = 1e-12;

/// Standard normal variate with the population standard deviation.
/// Throws DegenerateError when σ ≤ 1e-12.
Spectrum snv(std::span<const double> s);

struct BandSubset {
    std::string name;
    std::vector<std::size_t> indices;  // strictly increasing

    /// Throws DomainError unless indices are strictly increasing and < band_count.
    void validate(std::size_t band_count) const;

    /// "vis3" → {18, 52, 89}; "rgb" → {19, 56, 93}. Throws ConfigError otherwise.
    static BandSubset preset(const std::string& name);
};

enum class SubsetMode {
    subset_then_transform,  // default: restrict bands first, then transform the short spectrum
    transform_then_subset,  // transform the full spectrum, then keep the subset's features
};

struct GroupEntry {
    TransformId transform;
    std::size_t band;  // index into the full grid

    bool operator==(const GroupEntry&) const = default;
};

using GroupMap = std::vector<GroupEntry>;

struct FeatureVector {
    std::vector<double> values;  // 5 blocks of B′ values in kTransformOrder
    GroupMap group_map;
};

FeatureVector build_feature_vector(std::span<const double> s, const WavelengthGrid& grid,
                                   const std::optional<BandSubset>& subset = std::nullopt,
                                   SubsetMode mode = SubsetMode::subset_then_transform);

/// Group map for the five-block layout over the given bands.
GroupMap make_group_map(const std::vector<std::size_t>& bands);

struct FeatureTable {
    Matrix X;  // one row per dataset sample, in dataset order
    GroupMap group_map;
};

/// Feature vectors for every sample of the dataset.
FeatureTable build_feature_table(const Dataset& data,
                                 const std::optional<BandSubset>& subset = std::nullopt,
                                 SubsetMode mode = SubsetMode::subset_then_transform);

/// Column indices of the feature table belonging to one transform block.
std::vector<std::size_t> group_columns(const GroupMap& map, TransformId t);

}  // namespace spectrabench
