#include "spectrabench/cli/runner.hpp"
#include "spectrabench/dataset.hpp"
#include "spectrabench/error.hpp"
#include "spectrabench/evaluate.hpp"
#include "spectrabench/transforms.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace spectrabench;

namespace {

LabeledFeatures labeled(const Dataset& d, const Matrix& X, Split split) {
    const auto rows = d.indices(split);
    LabeledFeatures f{select_rows(X, rows), d.labels(Task::ripeness, rows), d.labels(Task::firmness, rows), {}};
    for (auto i : rows) f.ids.push_back(d.samples[i].sample_id);
    return f;
}

Matrix spectra(const Dataset& d) {
    Matrix S(static_cast<Eigen::Index>(d.samples.size()), static_cast<Eigen::Index>(d.grid.size()));
    for (std::size_t i = 0; i < d.samples.size(); ++i)
        for (std::size_t b = 0; b < d.grid.size(); ++b) S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = d.samples[i].spectrum[b];
    return S;
}

std::string evaluate_split(const Dataset& d, const std::string& model, const std::string& params_json,
                           const std::string& balance, bool pca, std::uint64_t seed) {
    const auto table = build_feature_table(d);
    PipelineConfig cfg;
    cfg.balance.kind = parse_balance_kind(balance);
    cfg.use_pca = pca;
    cfg.seed = seed;
    cfg.model = {model, cli::params_from_json(cli::json::parse(params_json)), seed};
    const auto fitted = fit_paired(cfg, labeled(d, table.X, Split::train));
    return cli::metrics_json(evaluate_paired(fitted, labeled(d, table.X, Split::test))).dump();
}

std::string run_phase(const std::string& phase, const std::filesystem::path& config, const std::filesystem::path& out,
                      std::optional<std::uint64_t> seed, std::optional<std::vector<std::string>> models, bool resume) {
    auto cfg = cli::load_config(config);
    cli::apply_overrides(cfg, seed, models);
    cli::Runner runner(std::move(cfg), {out, resume});
    return runner.run(phase).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    py::register_exception<Error>(m, "SpectraBenchError", PyExc_RuntimeError);

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("wavelengths", [](const Dataset& d) { return d.grid.values(); })
        .def_property_readonly("ids", [](const Dataset& d) {
            std::vector<std::string> ids;
            for (const auto& s : d.samples) ids.push_back(s.sample_id);
            return ids;
        })
        .def_property_readonly("fruits", [](const Dataset& d) {
            std::vector<std::string> out;
            for (const auto& s : d.samples) out.push_back(s.fruit.name());
            return out;
        })
        .def_property_readonly("splits", [](const Dataset& d) {
            std::vector<std::string> out;
            for (const auto& s : d.samples) out.push_back(to_string(s.split));
            return out;
        })
        .def_property_readonly("spectra", &spectra)
        .def("labels", [](const Dataset& d, const std::string& task) {
            std::vector<std::size_t> rows(d.samples.size());
            for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
            if (task != "ripeness" && task != "firmness") throw Error(ErrorKind::config, "unknown task: " + task);
            return d.labels(task == "ripeness" ? Task::ripeness : Task::firmness, rows);
        })
        .def("features", [](const Dataset& d) { return build_feature_table(d).X; })
        .def("__len__", [](const Dataset& d) { return d.samples.size(); });

    m.def("synth_dataset", [](std::uint64_t seed, std::vector<std::size_t> per_class, std::size_t band_count,
                              double separation, double noise_sd, double test_fraction, double unknown_fraction) {
        if (per_class.size() != 3) throw Error(ErrorKind::config, "per_class needs three counts");
        SynthSpec s;
        s.per_class_counts = {{Ripeness::unripe, per_class[0]}, {Ripeness::perfect, per_class[1]}, {Ripeness::overripe, per_class[2]}};
        s.band_count = band_count;
        s.separation = separation;
        s.noise_sd = noise_sd;
        s.test_fraction = test_fraction;
        s.unknown_fraction = unknown_fraction;
        return synth_dataset(seed, s);
    }, py::arg("seed") = 0, py::arg("per_class") = std::vector<std::size_t>{60, 60, 60}, py::arg("band_count") = 224,
       py::arg("separation") = 5.0, py::arg("noise_sd") = 0.01, py::arg("test_fraction") = 0.25,
       py::arg("unknown_fraction") = 0.0);
    m.def("load_dataset", &load_feature_table, py::arg("table"), py::arg("manifest"));
    m.def("_evaluate", &evaluate_split);
    m.def("_run_phase", &run_phase);

    m.def("wilson_ci", &wilson_ci, py::arg("successes"), py::arg("n"), py::arg("confidence") = 0.95);
    m.def("cohen_d_paired", &cohen_d_paired, py::arg("a"), py::arg("b"));
    m.def("friedman", [](const Matrix& scores) {
        const auto r = friedman(scores);
        return py::dict(py::arg("chi2") = r.chi2, py::arg("dof") = r.dof, py::arg("p") = r.p,
                        py::arg("mean_ranks") = r.mean_ranks);
    }, py::arg("scores"));
    m.attr("__version__") = SPECTRABENCH_VERSION;
}
