#include "doctest.h"
#include "support.hpp"

#include "spectrabench/error.hpp"
#include "spectrabench/models/model.hpp"

#include <fstream>
#include <set>

using namespace spectrabench;
using namespace sbtest;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

std::string header(std::size_t bands) {
    std::string h = "sample_id,fruit,ripeness,firmness_gf,split";
    char buf[16];
    for (std::size_t b = 0; b < bands; ++b) {
        std::snprintf(buf, sizeof buf, ",b%03zu", b);
        h += buf;
    }
    return h + "\n";
}

std::filesystem::path small_manifest(const std::filesystem::path& dir, std::size_t bands) {
    Manifest m{uniform_grid(bands), "test-cam"};
    auto p = dir / "manifest.json";
    write_manifest(m, p);
    return p;
}

}  // namespace

TEST_CASE("bin_firmness boundaries") {
    CHECK(bin_firmness(0.0) == FirmnessClass::soft);
    CHECK(bin_firmness(1000.0) == FirmnessClass::soft);
    CHECK(bin_firmness(1000.5) == FirmnessClass::medium);
    CHECK(bin_firmness(1001.0) == FirmnessClass::medium);
    CHECK(bin_firmness(2500.0) == FirmnessClass::medium);
    CHECK(bin_firmness(2500.5) == FirmnessClass::firm);
    CHECK(bin_firmness(2501.0) == FirmnessClass::firm);
    CHECK(bin_firmness(std::nullopt) == FirmnessClass::unknown);
    CHECK_THROWS_AS(bin_firmness(-1.0), DomainError);
}

TEST_CASE("bin_firmness is monotone on random readings") {
    Rng rng(3);
    for (int t = 0; t < 2000; ++t) {
        double a = rng.uniform(0.0, 5000.0), b = rng.uniform(0.0, 5000.0);
        if (a > b) std::swap(a, b);
        CHECK(static_cast<int>(bin_firmness(a)) <= static_cast<int>(bin_firmness(b)));
    }
}

TEST_CASE("wavelength grid validation") {
    CHECK_THROWS_AS(WavelengthGrid({400.0}), SchemaError);
    CHECK_THROWS_AS(WavelengthGrid({400.0, 400.0}), SchemaError);
    CHECK_THROWS_AS(WavelengthGrid({-1.0, 2.0}), SchemaError);
    CHECK(WavelengthGrid({400.0, 401.0}).size() == 2);
}

TEST_CASE("load_feature_table parses rows, labels and splits") {
    auto dir = temp_dir("load");
    auto manifest = small_manifest(dir, 4);
    write_text(dir / "t.csv", header(4) +
                                  "a1,avocado,unripe,900,train,0.1,0.2,0.3,0.4\n"
                                  "k1,kiwi,perfect,,test,0.5,0.6,0.7,0.8\n"
                                  "x1,pear,overripe,3000,train,1,2,3,4\n");
    const auto d = load_feature_table(dir / "t.csv", manifest);
    REQUIRE(d.samples.size() == 3);
    CHECK(d.count(Split::train) == 2);
    CHECK(d.count(Split::test) == 1);
    CHECK(d.samples[0].firmness_class() == FirmnessClass::soft);
    CHECK(d.samples[1].firmness_class() == FirmnessClass::unknown);
    CHECK(d.samples[2].fruit.kind == FruitKind::other);
    CHECK(d.samples[2].fruit.name() == "pear");
    CHECK(d.samples[2].ripeness == Ripeness::overripe);
    CHECK(d.samples[1].spectrum[2] == doctest::Approx(0.7));
}

TEST_CASE("header-only table gives an empty dataset with the grid") {
    auto dir = temp_dir("empty");
    auto manifest = small_manifest(dir, 4);
    write_text(dir / "t.csv", header(4));
    const auto d = load_feature_table(dir / "t.csv", manifest);
    CHECK(d.samples.empty());
    CHECK(d.grid.size() == 4);
}

TEST_CASE("load errors carry their kind") {
    auto dir = temp_dir("errors");
    auto manifest = small_manifest(dir, 4);

    write_text(dir / "short.csv", header(4) + "a1,avocado,unripe,900,train,0.1,0.2,0.3\n");
    try {
        load_feature_table(dir / "short.csv", manifest);
        FAIL("expected schema error");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }

    write_text(dir / "label.csv", header(4) + "a1,avocado,green,900,train,0.1,0.2,0.3,0.4\n");
    CHECK_THROWS_AS(load_feature_table(dir / "label.csv", manifest), LabelError);

    write_text(dir / "dup.csv", header(4) +
                                    "a1,avocado,unripe,900,train,0.1,0.2,0.3,0.4\n"
                                    "a1,avocado,unripe,900,test,0.1,0.2,0.3,0.4\n");
    CHECK_THROWS_AS(load_feature_table(dir / "dup.csv", manifest), IntegrityError);

    write_text(dir / "num.csv", header(4) + "a1,avocado,unripe,900,train,0.1,zz,0.3,0.4\n");
    try {
        load_feature_table(dir / "num.csv", manifest);
        FAIL("expected parse error");
    } catch (const ParseError& e) {
        CHECK(e.row() == std::optional<std::size_t>(1));
    }
}

TEST_CASE("feature table round trip keeps 9 significant digits") {
    auto dir = temp_dir("roundtrip");
    SynthSpec spec;
    spec.per_class_counts = {{Ripeness::unripe, 7}, {Ripeness::perfect, 5}, {Ripeness::overripe, 6}};
    spec.band_count = 16;
    spec.unknown_fraction = 0.3;
    const auto d = synth_dataset(11, spec);
    write_manifest({d.grid, d.camera}, dir / "m.json");
    write_feature_table(d, dir / "t.csv");
    const auto back = load_feature_table(dir / "t.csv", dir / "m.json");
    REQUIRE(back.samples.size() == d.samples.size());
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
        const auto& a = d.samples[i];
        const auto& b = back.samples[i];
        CHECK(a.sample_id == b.sample_id);
        CHECK(a.ripeness == b.ripeness);
        CHECK(a.split == b.split);
        CHECK(a.firmness_gf.has_value() == b.firmness_gf.has_value());
        for (std::size_t k = 0; k < a.spectrum.size(); ++k) {
            CHECK(std::abs(a.spectrum[k] - b.spectrum[k]) <= 1e-8 * std::max(1.0, std::abs(a.spectrum[k])));
        }
    }
    for (std::size_t k = 0; k < d.grid.size(); ++k) CHECK(back.grid[k] == doctest::Approx(d.grid[k]).epsilon(1e-12));
}

namespace {

Dataset fruit_pool(std::map<FruitKind, std::pair<int, int>> train_test) {
    Dataset d;
    d.grid = uniform_grid(3);
    int serial = 0;
    for (const auto& [fruit, counts] : train_test) {
        for (int i = 0; i < counts.first + counts.second; ++i) {
            Sample s;
            s.sample_id = "id" + std::to_string(serial++);
            s.fruit = Fruit{fruit, {}};
            s.spectrum = {1.0, 2.0, 3.0};
            s.split = i < counts.first ? Split::train : Split::test;
            d.samples.push_back(s);
        }
    }
    return d;
}

std::set<std::string> ids_with(const Dataset& d, Split s) {
    std::set<std::string> out;
    for (const auto& x : d.samples) {
        if (x.split == s) out.insert(x.sample_id);
    }
    return out;
}

}  // namespace

TEST_CASE("stratified_resplit with the reference counts gives n = 414") {
    auto pool = fruit_pool({{FruitKind::avocado, {150, 20}},
                            {FruitKind::kiwi, {140, 30}},
                            {FruitKind::mango, {60, 10}},
                            {FruitKind::kaki, {60, 10}},
                            {FruitKind::papaya, {51, 8}}});
    const auto test_ids = ids_with(pool, Split::test);
    const auto out = stratified_resplit(pool, test_ids, reference_resplit_counts(), 42);
    CHECK(out.count(Split::train) == 414);
    CHECK(ids_with(out, Split::test) == test_ids);
    std::map<std::string, std::size_t> per_fruit;
    for (const auto& s : out.samples) {
        if (s.split == Split::train) ++per_fruit[s.fruit.name()];
    }
    CHECK(per_fruit == reference_resplit_counts());
    out.validate();

    const auto again = stratified_resplit(pool, test_ids, reference_resplit_counts(), 42);
    CHECK(ids_with(again, Split::train) == ids_with(out, Split::train));
}

TEST_CASE("stratified_resplit capacity error names the fruit") {
    auto pool = fruit_pool({{FruitKind::papaya, {51, 5}}});
    try {
        stratified_resplit(pool, ids_with(pool, Split::test), {{"papaya", 200}}, 1);
        FAIL("expected capacity error");
    } catch (const CapacityError& e) {
        CHECK(std::string(e.what()).find("papaya") != std::string::npos);
    }
}

TEST_CASE("stratified_resplit never moves test samples or duplicates ids (property)") {
    Rng gen(99);
    for (int trial = 0; trial < 50; ++trial) {
        const int a_train = 5 + static_cast<int>(gen.below(20)), a_test = static_cast<int>(gen.below(6));
        const int k_train = 5 + static_cast<int>(gen.below(20)), k_test = static_cast<int>(gen.below(6));
        auto pool = fruit_pool({{FruitKind::avocado, {a_train, a_test}}, {FruitKind::kiwi, {k_train, k_test}}});
        const auto test_ids = ids_with(pool, Split::test);
        const std::size_t want_a = gen.below(static_cast<std::uint64_t>(a_train) + 1);
        const std::size_t want_k = gen.below(static_cast<std::uint64_t>(k_train) + 1);
        const auto out = stratified_resplit(pool, test_ids, {{"avocado", want_a}, {"kiwi", want_k}}, gen.next_u64());
        CHECK(ids_with(out, Split::test) == test_ids);
        CHECK(out.count(Split::train) == want_a + want_k);
        CHECK(out.samples.size() == pool.samples.size());
        out.validate();
    }
}

TEST_CASE("synth_dataset is deterministic and labels match the generator") {
    SynthSpec spec;
    const auto a = synth_dataset(7, spec);
    const auto b = synth_dataset(7, spec);
    REQUIRE(a.samples.size() == 180);
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].spectrum == b.samples[i].spectrum);
        CHECK(a.samples[i].firmness_gf == b.samples[i].firmness_gf);
    }
    std::map<Ripeness, int> counts;
    for (const auto& s : a.samples) ++counts[s.ripeness];
    CHECK(counts[Ripeness::unripe] == 60);
    CHECK(counts[Ripeness::overripe] == 60);
    a.validate();
}

TEST_CASE("synth_dataset at 5 sigma is learnable by a depth-3 tree in-sample") {
    const auto d = synth_dataset(7, SynthSpec{});
    Matrix X(static_cast<Eigen::Index>(d.samples.size()), static_cast<Eigen::Index>(d.grid.size()));
    std::vector<std::size_t> all(d.samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        all[i] = i;
        for (std::size_t b = 0; b < d.grid.size(); ++b) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = d.samples[i].spectrum[b];
    }
    const auto y = d.labels(Task::ripeness, all);
    const auto m = fit_model({"decision_tree", {{"max_depth", std::int64_t{3}}}, 1}, X, y);
    const auto pred = m.predict(X);
    int hits = 0;
    for (std::size_t i = 0; i < y.size(); ++i) hits += pred[i] == y[i];
    CHECK(static_cast<double>(hits) / static_cast<double>(y.size()) >= 0.95);
}

TEST_CASE("synth_dataset with zero separation carries no signal") {
    SynthSpec spec;
    spec.separation = 0.0;
    spec.per_class_counts = {{Ripeness::unripe, 150}, {Ripeness::perfect, 150}, {Ripeness::overripe, 150}};
    spec.band_count = 32;
    const auto d = synth_dataset(5, spec);
    const auto tr = d.indices(Split::train), te = d.indices(Split::test);
    auto matrix = [&](const std::vector<std::size_t>& rows) {
        Matrix X(static_cast<Eigen::Index>(rows.size()), 32);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (int b = 0; b < 32; ++b) X(static_cast<Eigen::Index>(i), b) = d.samples[rows[i]].spectrum[static_cast<std::size_t>(b)];
        return X;
    };
    const auto m = fit_model({"gaussian_nb", {}, 1}, matrix(tr), d.labels(Task::ripeness, tr));
    const auto pred = m.predict(matrix(te));
    const auto y = d.labels(Task::ripeness, te);
    int hits = 0;
    for (std::size_t i = 0; i < y.size(); ++i) hits += pred[i] == y[i];
    const double acc = static_cast<double>(hits) / static_cast<double>(y.size());
    CHECK(acc < 1.0 / 3.0 + 0.2);
}

TEST_CASE("manifest round trip") {
    auto dir = temp_dir("manifest");
    Manifest m{uniform_grid(5, 398.0, 1004.0), "vis-cam"};
    write_manifest(m, dir / "m.json");
    const auto back = load_manifest(dir / "m.json");
    CHECK(back.camera == "vis-cam");
    CHECK(back.grid == m.grid);
    write_text(dir / "bad.json", R"({"wavelengths_nm": [400, 500], "band_count": 3, "camera": "x"})");
    CHECK_THROWS_AS(load_manifest(dir / "bad.json"), SchemaError);
}
