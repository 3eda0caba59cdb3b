#include "spectrabench/dataset.hpp"

#include "spectrabench/error.hpp"
#include "spectrabench/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_set>

namespace spectrabench {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv(const std::string& line, std::size_t row) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            if (!trim(cur).empty()) throw ParseError("stray quote inside field", row);
            cur.clear();
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(was_quoted ? cur : trim(cur));
            cur.clear();
            was_quoted = false;
        } else {
            if (was_quoted && c != ' ' && c != '\r') {
                throw ParseError("text after closing quote", row);
            }
            cur.push_back(c);
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", row);
    fields.push_back(was_quoted ? cur : trim(cur));
    return fields;
}

double parse_real(const std::string& field, std::size_t row, const std::string& column) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || field.empty()) {
        throw ParseError("column " + column + ": not a number: '" + field + "'", row);
    }
    return v;
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string band_column(std::size_t b) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "b%03zu", b);
    return buf;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    return out + "\"";
}

constexpr const char* kFixedColumns[] = {"sample_id", "fruit", "ripeness", "firmness_gf", "split"};
constexpr std::size_t kNumFixed = 5;

}  // namespace

WavelengthGrid::WavelengthGrid(std::vector<double> wavelengths_nm) : nm_(std::move(wavelengths_nm)) {
    if (nm_.size() < 2) throw SchemaError("wavelength grid needs at least 2 bands");
    for (std::size_t i = 0; i < nm_.size(); ++i) {
        if (!std::isfinite(nm_[i]) || nm_[i] <= 0.0) {
            throw SchemaError("wavelength " + std::to_string(i) + " is not finite and positive");
        }
        if (i > 0 && !(nm_[i] > nm_[i - 1])) {
            throw SchemaError("wavelengths must be strictly increasing (index " +
                              std::to_string(i) + ")");
        }
    }
}

WavelengthGrid WavelengthGrid::subset(const std::vector<std::size_t>& indices) const {
    std::vector<double> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= nm_.size()) throw DomainError("band index " + std::to_string(i) + " out of range");
        out.push_back(nm_[i]);
    }
    WavelengthGrid g;
    g.nm_ = std::move(out);  // subsets of any size are allowed; callers validate ordering
    return g;
}

Fruit Fruit::parse(const std::string& token) {
    const std::string t = lower(trim(token));
    if (t.empty()) throw LabelError("empty fruit token");
    if (t == "avocado") return {FruitKind::avocado, {}};
    if (t == "kiwi") return {FruitKind::kiwi, {}};
    if (t == "mango") return {FruitKind::mango, {}};
    if (t == "kaki" || t == "persimmon") return {FruitKind::kaki, {}};
    if (t == "papaya") return {FruitKind::papaya, {}};
    return {FruitKind::other, t};
}

std::string Fruit::name() const {
    switch (kind) {
        case FruitKind::avocado: return "avocado";
        case FruitKind::kiwi: return "kiwi";
        case FruitKind::mango: return "mango";
        case FruitKind::kaki: return "kaki";
        case FruitKind::papaya: return "papaya";
        case FruitKind::other: return other_name;
    }
    return other_name;
}

Ripeness parse_ripeness(const std::string& token) {
    const std::string t = lower(trim(token));
    if (t == "unripe") return Ripeness::unripe;
    if (t == "perfect") return Ripeness::perfect;
    if (t == "overripe") return Ripeness::overripe;
    throw LabelError("unknown ripeness token '" + token + "'");
}

std::string to_string(Ripeness r) {
    switch (r) {
        case Ripeness::unripe: return "unripe";
        case Ripeness::perfect: return "perfect";
        case Ripeness::overripe: return "overripe";
    }
    return "?";
}

std::string to_string(FirmnessClass f) {
    switch (f) {
        case FirmnessClass::soft: return "soft";
        case FirmnessClass::medium: return "medium";
        case FirmnessClass::firm: return "firm";
        case FirmnessClass::unknown: return "unknown";
    }
    return "?";
}

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::test: return "test";
        case Split::unassigned: return "";
    }
    return "";
}

std::string to_string(Task t) { return t == Task::ripeness ? "ripeness" : "firmness"; }

FirmnessClass bin_firmness(std::optional<double> gf) {
    if (!gf) return FirmnessClass::unknown;
    const double v = *gf;
    if (!std::isfinite(v) || v < 0.0) {
        throw DomainError("firmness must be a non-negative finite reading");
    }
    if (v <= 1000.0) return FirmnessClass::soft;
    if (v <= 2500.0) return FirmnessClass::medium;
    return FirmnessClass::firm;
}

std::vector<std::size_t> Dataset::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].split == split) out.push_back(i);
    }
    return out;
}

Labels Dataset::labels(Task task, const std::vector<std::size_t>& rows) const {
    Labels y;
    y.reserve(rows.size());
    for (std::size_t i : rows) {
        const auto& s = samples[i];
        y.push_back(task == Task::ripeness ? static_cast<int>(s.ripeness)
                                           : static_cast<int>(s.firmness_class()));
    }
    return y;
}

void Dataset::validate() const {
    std::unordered_set<std::string> ids;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!ids.insert(s.sample_id).second) {
            throw IntegrityError("duplicate sample_id '" + s.sample_id + "'");
        }
        if (s.spectrum.size() != grid.size()) {
            throw SchemaError("sample '" + s.sample_id + "' has " +
                              std::to_string(s.spectrum.size()) + " bands, grid has " +
                              std::to_string(grid.size()));
        }
        for (double v : s.spectrum) {
            if (!std::isfinite(v)) {
                throw SchemaError("sample '" + s.sample_id + "' has a non-finite band value");
            }
        }
        if (s.firmness_gf && (!std::isfinite(*s.firmness_gf) || *s.firmness_gf < 0.0)) {
            throw SchemaError("sample '" + s.sample_id + "' has negative firmness");
        }
    }
    // A sample has a single split field, so unique ids already imply zero
    // train/test overlap; this re-check guards datasets assembled by hand.
    std::unordered_set<std::string> train_ids;
    for (const auto& s : samples)
        if (s.split == Split::train) train_ids.insert(s.sample_id);
    for (const auto& s : samples)
        if (s.split == Split::test && train_ids.count(s.sample_id))
            throw IntegrityError("sample '" + s.sample_id + "' is in both train and test");
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("manifest " + path.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("wavelengths_nm") || !j["wavelengths_nm"].is_array()) {
        throw SchemaError("manifest needs a 'wavelengths_nm' array");
    }
    std::vector<double> nm;
    for (const auto& v : j["wavelengths_nm"]) {
        if (!v.is_number()) throw SchemaError("manifest wavelengths must be numbers");
        nm.push_back(v.get<double>());
    }
    if (j.contains("band_count")) {
        if (!j["band_count"].is_number_integer() ||
            j["band_count"].get<std::int64_t>() != static_cast<std::int64_t>(nm.size())) {
            throw SchemaError("manifest band_count does not match wavelengths_nm length");
        }
    }
    Manifest m{WavelengthGrid(std::move(nm)), {}};
    if (j.contains("camera")) {
        if (!j["camera"].is_string()) throw SchemaError("manifest camera must be a string");
        m.camera = j["camera"].get<std::string>();
    }
    return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    nlohmann::json j;
    j["camera"] = manifest.camera;
    j["band_count"] = manifest.grid.size();
    j["wavelengths_nm"] = manifest.grid.values();
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write manifest " + path.string());
    out << j.dump(2) << "\n";
}

Dataset load_feature_table(const std::filesystem::path& table_path,
                           const std::filesystem::path& manifest_path) {
    const Manifest manifest = load_manifest(manifest_path);
    const std::size_t bands = manifest.grid.size();

    std::ifstream in(table_path, std::ios::binary);
    if (!in) throw ParseError("cannot open feature table " + table_path.string());

    Dataset data;
    data.grid = manifest.grid;
    data.camera = manifest.camera;
    data.provenance = table_path.filename().string() + " (camera=" +
                      (manifest.camera.empty() ? std::string("unspecified") : manifest.camera) +
                      ", bands=" + std::to_string(bands) + ")";

    std::string line;
    if (!std::getline(in, line)) throw ParseError("feature table is empty (no header)", 0);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv(line, 0);
    if (header.size() < kNumFixed) throw SchemaError("header is missing fixed columns");
    for (std::size_t c = 0; c < kNumFixed; ++c) {
        if (lower(header[c]) != kFixedColumns[c]) {
            throw SchemaError("header column " + std::to_string(c) + " must be '" +
                              kFixedColumns[c] + "', got '" + header[c] + "'");
        }
    }
    if (header.size() - kNumFixed != bands) {
        throw SchemaError("header has " + std::to_string(header.size() - kNumFixed) +
                          " band columns, manifest declares " + std::to_string(bands));
    }

    std::unordered_set<std::string> seen;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto f = split_csv(line, row);
        if (f.size() != header.size()) {
            throw SchemaError("row " + std::to_string(row) + ": expected " +
                              std::to_string(bands) + " band columns, found " +
                              std::to_string(f.size() < kNumFixed ? 0 : f.size() - kNumFixed));
        }
        Sample s;
        s.sample_id = f[0];
        if (s.sample_id.empty()) throw ParseError("empty sample_id", row);
        if (!seen.insert(s.sample_id).second) {
            throw IntegrityError("row " + std::to_string(row) + ": duplicate sample_id '" +
                                 s.sample_id + "'");
        }
        try {
            s.fruit = Fruit::parse(f[1]);
            s.ripeness = parse_ripeness(f[2]);
        } catch (const LabelError& e) {
            throw LabelError("row " + std::to_string(row) + ": " + e.what());
        }
        if (!f[3].empty()) {
            const double gf = parse_real(f[3], row, "firmness_gf");
            if (!std::isfinite(gf) || gf < 0.0) {
                throw SchemaError("row " + std::to_string(row) + ": negative firmness");
            }
            s.firmness_gf = gf;
        }
        const std::string split = lower(f[4]);
        if (split == "train") s.split = Split::train;
        else if (split == "test") s.split = Split::test;
        else if (split.empty()) s.split = Split::unassigned;
        else throw LabelError("row " + std::to_string(row) + ": unknown split '" + f[4] + "'");

        s.spectrum.resize(bands);
        for (std::size_t b = 0; b < bands; ++b) {
            s.spectrum[b] = parse_real(f[kNumFixed + b], row, header[kNumFixed + b]);
            if (!std::isfinite(s.spectrum[b])) {
                throw SchemaError("row " + std::to_string(row) + ": non-finite band value");
            }
        }
        data.samples.push_back(std::move(s));
    }
    data.validate();
    return data;
}

void write_feature_table(const Dataset& data, const std::filesystem::path& table_path) {
    std::ofstream out(table_path, std::ios::binary);
    if (!out) throw ParseError("cannot write feature table " + table_path.string());
    for (std::size_t c = 0; c < kNumFixed; ++c) out << (c ? "," : "") << kFixedColumns[c];
    for (std::size_t b = 0; b < data.grid.size(); ++b) out << "," << band_column(b);
    out << "\n";
    for (const auto& s : data.samples) {
        out << csv_escape(s.sample_id) << "," << csv_escape(s.fruit.name()) << ","
            << to_string(s.ripeness) << "," << (s.firmness_gf ? format_real(*s.firmness_gf) : "")
            << "," << to_string(s.split);
        for (double v : s.spectrum) out << "," << format_real(v);
        out << "\n";
    }
}

Dataset stratified_resplit(const Dataset& pool, const std::set<std::string>& fixed_test_ids,
                           const std::map<std::string, std::size_t>& per_fruit_train_counts,
                           std::uint64_t seed) {
    std::set<std::string> pool_ids;
    for (const auto& s : pool.samples) pool_ids.insert(s.sample_id);
    for (const auto& id : fixed_test_ids) {
        if (!pool_ids.count(id)) throw IntegrityError("test id '" + id + "' is not in the pool");
    }

    Dataset out = pool;
    std::map<std::string, std::vector<std::size_t>> candidates;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        auto& s = out.samples[i];
        if (fixed_test_ids.count(s.sample_id)) {
            s.split = Split::test;
        } else {
            s.split = Split::unassigned;
            candidates[s.fruit.name()].push_back(i);
        }
    }

    for (const auto& [fruit, want] : per_fruit_train_counts) {
        auto& rows = candidates[fruit];
        if (rows.size() < want) {
            throw CapacityError("fruit '" + fruit + "' has " + std::to_string(rows.size()) +
                                " non-test samples, " + std::to_string(want) + " requested");
        }
        Rng rng(derive_seed(seed, {"resplit", fruit}));
        for (std::size_t k : rng.sample_without_replacement(rows.size(), want)) {
            out.samples[rows[k]].split = Split::train;
        }
    }
    out.provenance = pool.provenance + " [stratified resplit]";
    return out;
}

std::map<std::string, std::size_t> reference_resplit_counts() {
    return {{"avocado", 130}, {"kiwi", 130}, {"mango", 56}, {"kaki", 55}, {"papaya", 43}};
}

Dataset synth_dataset(std::uint64_t seed, const SynthSpec& spec) {
    if (spec.band_count < 2) throw DomainError("synthetic spectra need at least 2 bands");
    if (!(spec.last_nm > spec.first_nm) || spec.first_nm <= 0.0) {
        throw DomainError("synthetic wavelength range must be increasing and positive");
    }
    if (spec.noise_sd < 0.0 || spec.separation < 0.0 || spec.test_fraction < 0.0 ||
        spec.test_fraction >= 1.0 || spec.unknown_fraction < 0.0 || spec.unknown_fraction > 1.0) {
        throw DomainError("synthetic spec parameters out of range");
    }

    const std::size_t B = spec.band_count;
    std::vector<double> nm(B);
    for (std::size_t b = 0; b < B; ++b) {
        nm[b] = spec.first_nm + (spec.last_nm - spec.first_nm) * static_cast<double>(b) /
                                    static_cast<double>(B - 1);
    }

    Dataset data;
    data.grid = WavelengthGrid(nm);
    data.camera = "synthetic";
    std::ostringstream prov;
    prov << "synthetic(seed=" << seed << ", bands=" << B << ", separation=" << spec.separation
         << ", noise_sd=" << spec.noise_sd << ")";
    data.provenance = prov.str();

    const double span = spec.last_nm - spec.first_nm;
    const double ripe_center = spec.first_nm + 0.30 * span;
    const double firm_center = spec.first_nm + 0.72 * span;
    const double width = span / 25.0;
    const double step = spec.separation * spec.noise_sd;
    const FruitKind fruits[] = {FruitKind::avocado, FruitKind::kiwi, FruitKind::mango,
                                FruitKind::kaki, FruitKind::papaya};

    Rng rng(derive_seed(seed, {"synth"}));
    std::size_t serial = 0;
    for (const auto& [ripeness, count] : spec.per_class_counts) {
        std::vector<std::size_t> order(count);
        for (std::size_t i = 0; i < count; ++i) order[i] = i;
        rng.shuffle(order);
        const auto n_test = static_cast<std::size_t>(
            std::llround(spec.test_fraction * static_cast<double>(count)));
        std::vector<bool> is_test(count, false);
        for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;

        for (std::size_t i = 0; i < count; ++i) {
            Sample s;
            char id[32];
            std::snprintf(id, sizeof id, "S%05zu", serial);
            s.sample_id = id;
            s.fruit = Fruit{fruits[serial % 5], {}};
            ++serial;
            s.ripeness = ripeness;
            s.split = is_test[i] ? Split::test : Split::train;

            const auto firm_class = static_cast<int>(rng.below(3));
            static constexpr double lo[] = {0.0, 1001.0, 2501.0};
            static constexpr double hi[] = {1000.0, 2500.0, 5000.0};
            const double gf = std::floor(rng.uniform(lo[firm_class], hi[firm_class] + 1.0));
            const bool withheld = rng.uniform() < spec.unknown_fraction;
            if (!withheld) s.firmness_gf = std::min(gf, hi[firm_class]);

            const double fruit_offset = 0.02 * static_cast<double>(static_cast<int>(s.fruit.kind));
            const double ripe_depth = step * static_cast<double>(static_cast<int>(ripeness));
            const double firm_depth = step * static_cast<double>(firm_class);
            s.spectrum.resize(B);
            for (std::size_t b = 0; b < B; ++b) {
                const double x = nm[b];
                const double baseline =
                    0.25 + fruit_offset + 0.35 / (1.0 + std::exp(-(x - 715.0) / 18.0));
                const double zr = (x - ripe_center) / width;
                const double zf = (x - firm_center) / width;
                s.spectrum[b] = baseline - ripe_depth * std::exp(-0.5 * zr * zr) -
                                firm_depth * std::exp(-0.5 * zf * zf) +
                                rng.normal(0.0, spec.noise_sd);
            }
            data.samples.push_back(std::move(s));
        }
    }
    data.validate();
    return data;
}

}  // namespace spectrabench
