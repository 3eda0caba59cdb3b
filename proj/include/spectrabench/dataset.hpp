#pragma once

#include "spectrabench/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace spectrabench {

/// Strictly increasing wavelengths in nm.
class WavelengthGrid {
public:
    WavelengthGrid() = default;
    /// Throws SchemaError unless values are finite, positive, strictly increasing, length ≥ 2.
    explicit WavelengthGrid(std::vector<double> wavelengths_nm);

    std::size_t size() const { return nm_.size(); }
    double operator[](std::size_t i) const { return nm_[i]; }
    const std::vector<double>& values() const { return nm_; }

    /// Grid restricted to the given band indices.
    WavelengthGrid subset(const std::vector<std::size_t>& indices) const;

    bool operator==(const WavelengthGrid&) const = default;

private:
    std::vector<double> nm_;
};

enum class FruitKind { avocado, kiwi, mango, kaki, papaya, other };

struct Fruit {
    FruitKind kind = FruitKind::other;
    std::string other_name;  // only for FruitKind::other

    static Fruit parse(const std::string& token);
    std::string name() const;

    auto operator<=>(const Fruit&) const = default;
};

enum class Ripeness : int { unripe = 0, perfect = 1, overripe = 2 };

/// Ordered soft < medium < firm; unknown marks a missing firmness measurement.
enum class FirmnessClass : int { soft = 0, medium = 1, firm = 2, unknown = 3 };

enum class Split { train, test, unassigned };

inline constexpr int kNumRipeness = 3;
inline constexpr int kNumFirmness = 4;

Ripeness parse_ripeness(const std::string& token);
std::string to_string(Ripeness r);
std::string to_string(FirmnessClass f);
std::string to_string(Split s);

/// Bins a penetrometer reading: soft ≤ 1000 gf < medium ≤ 2500 gf < firm.
/// Absent → unknown. Throws DomainError for negative or non-finite readings.
FirmnessClass bin_firmness(std::optional<double> gf);

struct Sample {
    std::string sample_id;
    Fruit fruit;
    Ripeness ripeness = Ripeness::unripe;
    std::optional<double> firmness_gf;
    std::vector<double> spectrum;
    Split split = Split::unassigned;

    FirmnessClass firmness_class() const { return bin_firmness(firmness_gf); }
};

enum class Task { ripeness, firmness };

std::string to_string(Task t);

struct Dataset {
    WavelengthGrid grid;
    std::vector<Sample> samples;
    std::string provenance;
    std::string camera;

    std::vector<std::size_t> indices(Split split) const;
    std::size_t count(Split split) const { return indices(split).size(); }

    /// Task labels (Ripeness or FirmnessClass cast to int) for the given rows.
    Labels labels(Task task, const std::vector<std::size_t>& rows) const;

    /// Throws IntegrityError / SchemaError when a Dataset invariant is broken:
    /// unique ids, spectrum lengths, finite values, non-negative firmness,
    /// and no id in both train and test.
    void validate() const;
};

/// Manifest: JSON object with "wavelengths_nm" (array of B numbers),
/// "band_count" (B) and "camera" (string).
struct Manifest {
    WavelengthGrid grid;
    std::string camera;
};

Manifest load_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Reads a feature table with header
/// `sample_id,fruit,ripeness,firmness_gf,split,b000..b{B-1}` against the manifest grid.
Dataset load_feature_table(const std::filesystem::path& table_path,
                           const std::filesystem::path& manifest_path);

/// Writes the table in the same layout; reals are printed with 9 significant digits.
/// Samples with Split::unassigned are written with an empty split field.
void write_feature_table(const Dataset& data, const std::filesystem::path& table_path);

/// Replaces the training partition with a fruit-balanced sample.
///
/// Samples in fixed_test_ids become (or stay) test. For every fruit in
/// per_fruit_train_counts, that many of its non-test samples are drawn uniformly
/// without replacement and marked train; every other non-test sample becomes
/// unassigned. Throws IntegrityError if a test id is not in the pool and
/// CapacityError naming the fruit when it has too few non-test samples.
Dataset stratified_resplit(const Dataset& pool, const std::set<std::string>& fixed_test_ids,
                           const std::map<std::string, std::size_t>& per_fruit_train_counts,
                           std::uint64_t seed);

/// Reference per-fruit counts for the fruit-balanced training set (n = 414).
std::map<std::string, std::size_t> reference_resplit_counts();

struct SynthSpec {
    /// Samples per ripeness class (unripe, perfect, overripe).
    std::map<Ripeness, std::size_t> per_class_counts{
        {Ripeness::unripe, 60}, {Ripeness::perfect, 60}, {Ripeness::overripe, 60}};
    std::size_t band_count = 224;
    double first_nm = 398.0;
    double last_nm = 1004.0;
    /// Class-mean offset between adjacent classes at a feature center, in units of noise_sd.
    double separation = 5.0;
    double noise_sd = 0.01;
    double test_fraction = 0.25;
    /// Fraction of samples whose firmness is withheld (encoded as unknown).
    double unknown_fraction = 0.0;
};

/// Synthetic spectra: smooth red-edge baseline, one Gaussian absorption band whose
/// depth encodes ripeness and another whose depth encodes firmness class, plus
/// i.i.d. Gaussian noise. Deterministic per seed.
Dataset synth_dataset(std::uint64_t seed, const SynthSpec& spec);

}  // namespace spectrabench
