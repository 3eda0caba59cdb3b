#include "spectrabench/transforms.hpp"

#include "spectrabench/error.hpp"

#include <cmath>

namespace spectrabench {

std::string to_string(TransformId t) {
    switch (t) {
        case TransformId::raw: return "raw";
        case TransformId::d1: return "d1";
        case TransformId::cr: return "cr";
        case TransformId::snv: return "snv";
        case TransformId::d1cr: return "d1cr";
    }
    return "?";
}

Spectrum mean_spectrum(const Matrix& pixels, const std::vector<bool>& foreground) {
    if (static_cast<std::size_t>(pixels.rows()) != foreground.size()) {
        throw ShapeError("foreground mask length does not match pixel rows");
    }
    Spectrum out(static_cast<std::size_t>(pixels.cols()), 0.0);
    std::size_t n = 0;
    for (Eigen::Index p = 0; p < pixels.rows(); ++p) {
        if (!foreground[static_cast<std::size_t>(p)]) continue;
        ++n;
        for (Eigen::Index b = 0; b < pixels.cols(); ++b) out[static_cast<std::size_t>(b)] += pixels(p, b);
    }
    if (n == 0) throw DomainError("foreground mask selects no pixel");
    for (double& v : out) v /= static_cast<double>(n);
    return out;
}

Spectrum first_derivative(std::span<const double> s, const WavelengthGrid& grid) {
    const std::size_t n = s.size();
    if (n < 3) throw DomainError("first derivative needs at least 3 bands");
    if (grid.size() != n) throw ShapeError("spectrum and grid lengths differ");
    Spectrum d(n);
    d[0] = (s[1] - s[0]) / (grid[1] - grid[0]);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        d[i] = (s[i + 1] - s[i - 1]) / (grid[i + 1] - grid[i - 1]);
    }
    d[n - 1] = (s[n - 1] - s[n - 2]) / (grid[n - 1] - grid[n - 2]);
    return d;
}

Spectrum upper_hull_continuum(std::span<const double> s, const WavelengthGrid& grid) {
    const std::size_t n = s.size();
    if (n < 2) throw DomainError("continuum removal needs at least 2 bands");
    if (grid.size() != n) throw ShapeError("spectrum and grid lengths differ");
    for (double v : s) {
        if (!std::isfinite(v)) throw DomainError("continuum removal on non-finite spectrum");
    }

    // Monotone chain over points already sorted by wavelength; keep clockwise turns.
    std::vector<std::size_t> hull;
    for (std::size_t i = 0; i < n; ++i) {
        while (hull.size() >= 2) {
            const std::size_t a = hull[hull.size() - 2];
            const std::size_t b = hull.back();
            const double cross = (grid[b] - grid[a]) * (s[i] - s[a]) - (s[b] - s[a]) * (grid[i] - grid[a]);
            if (cross >= 0.0) hull.pop_back();
            else break;
        }
        hull.push_back(i);
    }

    Spectrum c(n);
    for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
        const std::size_t a = hull[h];
        const std::size_t b = hull[h + 1];
        c[a] = s[a];
        const double slope = (s[b] - s[a]) / (grid[b] - grid[a]);
        for (std::size_t i = a + 1; i < b; ++i) {
            // Clamp so rounding never puts the continuum under the spectrum.
            c[i] = std::max(s[a] + slope * (grid[i] - grid[a]), s[i]);
        }
    }
    c[hull.back()] = s[hull.back()];
    return c;
}

Spectrum continuum_removal(std::span<const double> s, const WavelengthGrid& grid) {
    const Spectrum c = upper_hull_continuum(s, grid);
    Spectrum out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        out[i] = c[i] > 0.0 ? s[i] / c[i] : 1.0;
    }
    return out;
}

Spectrum snv(std::span<const double> s) {
    const std::size_t n = s.size();
    if (n < 2) throw DomainError("SNV needs at least 2 values");
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (!(sd > kSnvEpsilon)) throw DegenerateError("SNV of a constant spectrum");
    Spectrum out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (s[i] - mean) / sd;
    return out;
}

void BandSubset::validate(std::size_t band_count) const {
    if (indices.empty()) throw DomainError("band subset '" + name + "' is empty");
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= band_count) {
            throw DomainError("band subset '" + name + "' index " + std::to_string(indices[i]) +
                              " out of range");
        }
        if (i > 0 && indices[i] <= indices[i - 1]) {
            throw DomainError("band subset '" + name + "' indices must be strictly increasing");
        }
    }
}

BandSubset BandSubset::preset(const std::string& name) {
    if (name == "vis3") return {"vis3", {18, 52, 89}};
    if (name == "rgb") return {"rgb", {19, 56, 93}};
    throw ConfigError("unknown band subset preset '" + name + "'");
}

GroupMap make_group_map(const std::vector<std::size_t>& bands) {
    GroupMap map;
    map.reserve(5 * bands.size());
    for (TransformId t : kTransformOrder)
        for (std::size_t b : bands) map.push_back({t, b});
    return map;
}

namespace {

std::array<Spectrum, 5> all_transforms(std::span<const double> s, const WavelengthGrid& grid) {
    Spectrum raw(s.begin(), s.end());
    Spectrum d1 = first_derivative(s, grid);
    Spectrum cr = continuum_removal(s, grid);
    Spectrum sn = snv(s);
    Spectrum d1cr = first_derivative(cr, grid);
    return {std::move(raw), std::move(d1), std::move(cr), std::move(sn), std::move(d1cr)};
}

}  // namespace

FeatureVector build_feature_vector(std::span<const double> s, const WavelengthGrid& grid,
                                   const std::optional<BandSubset>& subset, SubsetMode mode) {
    if (s.size() != grid.size()) throw ShapeError("spectrum and grid lengths differ");
    FeatureVector fv;
    if (!subset) {
        std::vector<std::size_t> bands(s.size());
        for (std::size_t i = 0; i < bands.size(); ++i) bands[i] = i;
        for (const auto& block : all_transforms(s, grid))
            fv.values.insert(fv.values.end(), block.begin(), block.end());
        fv.group_map = make_group_map(bands);
        return fv;
    }

    subset->validate(grid.size());
    const auto& idx = subset->indices;
    if (mode == SubsetMode::subset_then_transform) {
        Spectrum reduced;
        reduced.reserve(idx.size());
        for (std::size_t i : idx) reduced.push_back(s[i]);
        for (const auto& block : all_transforms(reduced, grid.subset(idx)))
            fv.values.insert(fv.values.end(), block.begin(), block.end());
    } else {
        for (const auto& block : all_transforms(s, grid))
            for (std::size_t i : idx) fv.values.push_back(block[i]);
    }
    fv.group_map = make_group_map(idx);
    return fv;
}

FeatureTable build_feature_table(const Dataset& data, const std::optional<BandSubset>& subset,
                                 SubsetMode mode) {
    FeatureTable table;
    const std::size_t width = 5 * (subset ? subset->indices.size() : data.grid.size());
    table.X.resize(static_cast<Eigen::Index>(data.samples.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        FeatureVector fv;
        try {
            fv = build_feature_vector(data.samples[i].spectrum, data.grid, subset, mode);
        } catch (const Error& e) {
            throw Error(e.kind(), "sample '" + data.samples[i].sample_id + "': " + e.what());
        }
        for (std::size_t f = 0; f < width; ++f) {
            table.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = fv.values[f];
        }
        if (i == 0) table.group_map = std::move(fv.group_map);
    }
    if (data.samples.empty()) {
        std::vector<std::size_t> bands;
        if (subset) bands = subset->indices;
        else for (std::size_t b = 0; b < data.grid.size(); ++b) bands.push_back(b);
        table.group_map = make_group_map(bands);
    }
    return table;
}

std::vector<std::size_t> group_columns(const GroupMap& map, TransformId t) {
    std::vector<std::size_t> cols;
    for (std::size_t f = 0; f < map.size(); ++f)
        if (map[f].transform == t) cols.push_back(f);
    return cols;
}

}  // namespace spectrabench
