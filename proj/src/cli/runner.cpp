#include "spectrabench/cli/runner.hpp"

#include "spectrabench/error.hpp"
#include "spectrabench/models/model.hpp"
#include "spectrabench/parallel.hpp"
#include "spectrabench/rng.hpp"
#include "spectrabench/tune.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace spectrabench::cli {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t data_hash(const LabeledFeatures& d) {
    std::uint64_t h = fnv1a64(std::string_view(reinterpret_cast<const char*>(d.X.data()),
                                               static_cast<std::size_t>(d.X.size()) * sizeof(double)));
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(d.ripeness.data()), d.ripeness.size() * sizeof(int)), h);
    return fnv1a64(std::string_view(reinterpret_cast<const char*>(d.firmness.data()), d.firmness.size() * sizeof(int)), h);
}

LabeledFeatures labeled(const Dataset& data, const Matrix& X, const std::vector<std::size_t>& rows) {
    LabeledFeatures out;
    out.X = select_rows(X, rows);
    out.ripeness = data.labels(Task::ripeness, rows);
    out.firmness = data.labels(Task::firmness, rows);
    for (auto i : rows) out.ids.push_back(data.samples[i].sample_id);
    return out;
}

std::string preprocessing_name(BalanceKind b, bool pca) { return to_string(b) + (pca ? "+pca" : ""); }

std::pair<BalanceKind, bool> best_preprocessing(const json& phase2_doc) {
    const auto& b = phase2_doc.at("summary").at("best_preprocessing");
    return {parse_balance_kind(b.at("balance").get<std::string>()), b.at("pca").get<bool>()};
}

// Models of a phase-3 document ordered by test overall accuracy, best first.
std::vector<std::pair<std::string, double>> ranked_models(const json& phase3_doc) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& r : phase3_doc.at("tables").value("models", json::array())) {
        if (r.contains("overall_accuracy")) out.emplace_back(r.at("model").get<std::string>(), r.at("overall_accuracy").get<double>());
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

void save_pair(const PairedPipeline& p, const std::filesystem::path& path) {
    ByteWriter w;
    p.ripeness.save(w);
    p.firmness.save(w);
    std::ofstream out(path, std::ios::binary);
    out << w.bytes();
}

std::optional<PairedPipeline> load_pair(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        ByteReader r(bytes);
        auto ripeness = FittedPipeline::load(r);
        auto firmness = FittedPipeline::load(r);
        return PairedPipeline{std::move(ripeness), std::move(firmness)};
    } catch (const Error&) {
        return std::nullopt;  // stale or truncated artifact: refit
    }
}

}  // namespace

json to_json(const ParamValue& v) {
    return std::visit([](const auto& x) { return json(x); }, v);
}

json to_json(const ParamMap& p) {
    json j = json::object();
    for (const auto& [k, v] : p) j[k] = to_json(v);
    return j;
}

ParamMap params_from_json(const json& j) {
    ParamMap p;
    for (const auto& [k, v] : j.items()) {
        if (v.is_number_integer()) p[k] = v.get<std::int64_t>();
        else if (v.is_number()) p[k] = v.get<double>();
        else if (v.is_string()) p[k] = v.get<std::string>();
        else throw ConfigError("hyperparameter '" + k + "' has an unsupported type");
    }
    return p;
}

json metrics_json(const PairedMetrics& m) {
    json j = json::object();
    for (const auto& [k, v] : metric_values(m)) j[k] = v;
    j["n_ripeness"] = m.ripeness.n_scored;
    j["n_firmness"] = m.firmness.n_scored;
    return j;
}

Runner::Runner(RunConfig cfg, RunOptions opts) : cfg_(std::move(cfg)), opts_(std::move(opts)), hash_(cfg_.hash()) {}

const std::vector<std::string>& Runner::phases() {
    static const std::vector<std::string> names{"phase1", "phase2", "phase3", "phase4", "phase5",
                                                "phase6", "bands",  "synth",  "validate"};
    return names;
}

json Runner::run(const std::string& phase) {
    const auto t0 = std::chrono::steady_clock::now();
    std::optional<Report> report;
    if (phase == "phase1") report = phase1();
    else if (phase == "phase2") report = phase2();
    else if (phase == "phase3") report = phase3();
    else if (phase == "phase4") report = phase4();
    else if (phase == "phase5") report = phase5();
    else if (phase == "phase6") report = phase6();
    else if (phase == "bands") report = bands();
    else if (phase == "synth") report = synth();
    else if (phase == "validate") report = validate();
    else throw ConfigError("unknown phase: " + phase);
    report->time("total", seconds_since(t0));
    report->write(opts_.out, opts_.markdown);
    return report->to_json();
}

std::optional<json> Runner::existing(const std::string& phase) const {
    const auto path = opts_.out / (phase + ".json");
    if (!std::filesystem::exists(path)) return std::nullopt;
    auto doc = read_report(path);
    if (doc.value("config_hash", "") != hash_) return std::nullopt;
    return doc;
}

json Runner::ensure(const std::string& phase) {
    if (auto doc = existing(phase)) return *doc;
    return run(phase);
}

const Dataset& Runner::dataset() {
    if (!data_) {
        if (cfg_.synth) {
            data_ = synth_dataset(cfg_.synth_seed, *cfg_.synth);
        } else {
            for (const auto& p : {cfg_.table, cfg_.manifest}) {
                if (!std::filesystem::exists(p)) throw ConfigError("dataset file not found: " + p.string());
            }
            data_ = load_feature_table(cfg_.table, cfg_.manifest);
        }
        data_->validate();
        if (data_->count(Split::train) == 0 || data_->count(Split::test) == 0) {
            throw IntegrityError("the dataset needs both train and test samples");
        }
    }
    return *data_;
}

const FeatureTable& Runner::features(const std::optional<BandSubset>& subset) {
    const std::string key = subset ? subset->name : "";
    auto it = features_.find(key);
    if (it == features_.end()) {
        if (subset) subset->validate(dataset().grid.size());
        it = features_.emplace(key, build_feature_table(dataset(), subset, cfg_.subset_mode)).first;
    }
    return it->second;
}

std::map<std::string, std::size_t> Runner::resplit_counts() {
    if (cfg_.resplit_mode == ResplitMode::reference) return reference_resplit_counts();
    if (cfg_.resplit_mode == ResplitMode::explicit_counts) return cfg_.resplit_counts;
    // Equal share of the original training size per fruit, capped by availability.
    const auto& d = dataset();
    std::map<std::string, std::size_t> available;
    for (const auto& s : d.samples) {
        if (s.split != Split::test) ++available[s.fruit.name()];
    }
    const std::size_t train_total = d.count(Split::train);
    const std::size_t share = (train_total + available.size() - 1) / available.size();
    std::map<std::string, std::size_t> out;
    for (const auto& [fruit, n] : available) out[fruit] = std::min(n, share);
    return out;
}

Runner::TrainTest Runner::split(BalanceKind kind, const std::optional<BandSubset>& subset) {
    const auto& d = dataset();
    const Matrix& X = features(subset).X;
    std::vector<std::size_t> train = d.indices(Split::train);
    const std::vector<std::size_t> test = d.indices(Split::test);
    if (kind == BalanceKind::stratified_resplit) {
        std::set<std::string> test_ids;
        for (auto i : test) test_ids.insert(d.samples[i].sample_id);
        train = stratified_resplit(d, test_ids, resplit_counts(), derive_seed(cfg_.global_seed, {"resplit"}))
                    .indices(Split::train);
    }
    return {labeled(d, X, train), labeled(d, X, test)};
}

PairedPipeline Runner::fit_cached(const std::string& unit, const PipelineConfig& cfg, const LabeledFeatures& train,
                                  double* seconds) {
    std::string key = hash_ + "|" + unit + "|" + cfg.model.name + "|" + to_string(cfg.balance.kind) + "|" +
                      std::to_string(cfg.use_pca) + "|" + std::to_string(cfg.seed) + "|" + hex(data_hash(train));
    for (const auto& [k, v] : cfg.model.hyperparams) key += "|" + k + "=" + to_string(v);
    const auto dir = opts_.out / "cache";
    const auto path = dir / (hex(fnv1a64(key)) + ".sbpp");
    if (opts_.resume) {
        if (auto hit = load_pair(path)) {
            if (seconds) *seconds = 0.0;
            return std::move(*hit);
        }
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto fitted = fit_paired(cfg, train);
    if (seconds) *seconds = seconds_since(t0);
    std::filesystem::create_directories(dir);
    save_pair(fitted, path);
    return fitted;
}

ParamMap Runner::tuned_params(const json& phase3_doc, const std::string& model) const {
    for (const auto& r : phase3_doc.at("tables").value("models", json::array())) {
        if (r.at("model") == model && r.contains("best_params")) return params_from_json(r.at("best_params"));
    }
    return {};
}

Report Runner::phase1() {
    Report rep("phase1", cfg_, dataset().provenance);
    const auto tt = split(BalanceKind::original);
    std::vector<json> rows(cfg_.models.size());
    std::vector<double> fit_s(cfg_.models.size(), 0.0), predict_s(cfg_.models.size(), 0.0);
    parallel_for(cfg_.models.size(), [&](std::size_t m) {
        const auto& name = cfg_.models[m];
        json row = {{"model", name}};
        try {
            PipelineConfig pc;
            pc.model = {name, {}, 0};
            pc.seed = derive_seed(cfg_.global_seed, {"phase1", name});
            const auto fitted = fit_cached("phase1", pc, tt.train, &fit_s[m]);
            const auto t0 = std::chrono::steady_clock::now();
            row.update(metrics_json(evaluate_paired(fitted, tt.test)));
            predict_s[m] = seconds_since(t0);
            ByteWriter w;
            fitted.ripeness.save(w);
            fitted.firmness.save(w);
            row["artifact_size_bytes"] = w.bytes().size();
        } catch (const Error& e) {
            row["error"] = e.what();
        }
        rows[m] = std::move(row);
    });
    for (std::size_t m = 0; m < rows.size(); ++m) {
        rep.add_row("models", rows[m]);
        rep.time("fit/" + cfg_.models[m], fit_s[m]);
        rep.time("predict/" + cfg_.models[m], predict_s[m]);
    }
    rep.summary()["n_train"] = tt.train.size();
    rep.summary()["n_test"] = tt.test.size();
    rep.summary()["n_features"] = tt.train.X.cols();
    return rep;
}

Report Runner::phase2() {
    Report rep("phase2", cfg_, dataset().provenance);
    struct Cell {
        BalanceKind balance;
        bool pca;
        std::string model;
    };
    std::vector<Cell> cells;
    for (auto b : cfg_.balance)
        for (bool p : cfg_.pca)
            for (const auto& m : cfg_.models) cells.push_back({b, p, m});

    std::map<BalanceKind, TrainTest> splits;
    for (auto b : cfg_.balance) splits.emplace(b, split(b));

    std::vector<json> rows(cells.size());
    std::vector<double> score(cells.size(), 0.0), fit_s(cells.size(), 0.0);
    parallel_for(cells.size(), [&](std::size_t c) {
        const auto& cell = cells[c];
        const auto& tt = splits.at(cell.balance);
        json row = {{"balance", to_string(cell.balance)}, {"pca", cell.pca}, {"model", cell.model}};
        try {
            PipelineConfig pc;
            pc.balance.kind = cell.balance;
            pc.use_pca = cell.pca;
            pc.pca_variance_target = cfg_.pca_variance;
            pc.model = {cell.model, {}, 0};
            pc.seed = derive_seed(cfg_.global_seed, {"phase2", cell.model});
            const auto fitted = fit_cached("phase2", pc, tt.train, &fit_s[c]);
            const auto m = evaluate_paired(fitted, tt.test);
            row.update(metrics_json(m));
            if (fitted.ripeness.pca()) row["pca_components_ripeness"] = fitted.ripeness.pca()->k;
            score[c] = m.overall_accuracy;
            if (cfg_.select_on == "validation") {
                score[c] = holdout_objective(pc, tt.train, derive_seed(cfg_.global_seed, {"phase2", "validation"}));
                row["validation_score"] = score[c];
            }
        } catch (const Error& e) {
            row["error"] = e.what();
        }
        rows[c] = std::move(row);
    });

    // Grid of test OA: models × preprocessing configurations. Failed cells count as 0.
    const auto n_models = cfg_.models.size();
    const auto n_configs = cells.size() / n_models;
    Matrix grid(static_cast<Eigen::Index>(n_models), static_cast<Eigen::Index>(n_configs));
    for (std::size_t c = 0; c < cells.size(); ++c) {
        rep.add_row("grid", rows[c]);
        rep.time("fit/" + preprocessing_name(cells[c].balance, cells[c].pca) + "/" + cells[c].model, fit_s[c]);
        grid(static_cast<Eigen::Index>(c % n_models), static_cast<Eigen::Index>(c / n_models)) =
            rows[c].value("overall_accuracy", 0.0);
    }

    for (std::size_t m = 0; m < n_models; ++m) {
        std::size_t best = m;
        for (std::size_t c = m; c < cells.size(); c += n_models) {
            if (score[c] > score[best]) best = c;
        }
        json row = rows[best];
        row["selection_score"] = score[best];
        rep.add_row("best_per_model", row);
    }

    std::size_t best_cfg = 0;
    std::vector<double> mean_score(n_configs, 0.0);
    for (std::size_t k = 0; k < n_configs; ++k) {
        for (std::size_t m = 0; m < n_models; ++m) mean_score[k] += score[k * n_models + m] / static_cast<double>(n_models);
        rep.add_row("preprocessing", {{"balance", to_string(cells[k * n_models].balance)},
                                      {"pca", cells[k * n_models].pca},
                                      {"mean_selection_score", mean_score[k]},
                                      {"mean_overall_accuracy", grid.col(static_cast<Eigen::Index>(k)).mean()}});
        if (mean_score[k] > mean_score[best_cfg]) best_cfg = k;
    }
    rep.summary()["select_on"] = cfg_.select_on;
    rep.summary()["best_preprocessing"] = {{"balance", to_string(cells[best_cfg * n_models].balance)},
                                           {"pca", cells[best_cfg * n_models].pca},
                                           {"mean_selection_score", mean_score[best_cfg]}};
    if (cfg_.select_on == "test") {
        rep.note("preprocessing selected on test-set accuracy, as in the reference protocol; "
                 "set select_on to 'validation' for a leakage-free choice");
    }

    if (grid.rows() >= 2 && grid.cols() >= 2) {
        auto median = [](std::vector<double> v) {
            std::sort(v.begin(), v.end());
            const auto n = v.size();
            return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
        };
        std::vector<double> model_range, config_range;
        for (Eigen::Index c = 0; c < grid.cols(); ++c) model_range.push_back(grid.col(c).maxCoeff() - grid.col(c).minCoeff());
        for (Eigen::Index m = 0; m < grid.rows(); ++m) config_range.push_back(grid.row(m).maxCoeff() - grid.row(m).minCoeff());
        const auto boot =
            bootstrap_median_range_diff(grid, cfg_.bootstrap_resamples, derive_seed(cfg_.global_seed, {"phase2", "bootstrap"}));
        rep.summary()["median_model_range_pp"] = 100.0 * median(model_range);
        rep.summary()["median_preprocessing_range_pp"] = 100.0 * median(config_range);
        rep.summary()["range_difference_bootstrap_pp"] = {
            {"statistic", 100.0 * boot.statistic}, {"ci_lo", 100.0 * boot.lo}, {"ci_hi", 100.0 * boot.hi},
            {"resamples", cfg_.bootstrap_resamples}};
    } else {
        rep.note("range bootstrap needs at least 2 models and 2 preprocessing configurations");
    }
    rep.summary()["n_cells"] = cells.size();
    return rep;
}

Report Runner::phase3() {
    const json p2 = ensure("phase2");
    Report rep("phase3", cfg_, dataset().provenance);
    const auto [balance, use_pca] = best_preprocessing(p2);
    rep.summary()["preprocessing"] = {{"balance", to_string(balance)}, {"pca", use_pca}};
    rep.summary()["n_trials"] = cfg_.n_trials;
    const auto tt = split(balance);
    const auto n_test = static_cast<std::int64_t>(tt.test.size());

    std::vector<json> rows(cfg_.models.size());
    std::vector<std::vector<json>> trials(cfg_.models.size());
    std::vector<double> tune_s(cfg_.models.size(), 0.0);
    parallel_for(cfg_.models.size(), [&](std::size_t m) {
        const auto& name = cfg_.models[m];
        json row = {{"model", name}};
        try {
            PipelineConfig base;
            base.balance.kind = balance;
            base.use_pca = use_pca;
            base.pca_variance_target = cfg_.pca_variance;
            base.model = {name, {}, 0};
            base.seed = derive_seed(cfg_.global_seed, {"phase3", name});
            const auto& space = ModelRegistry::global().get(name).space;
            const auto study_seed = derive_seed(cfg_.global_seed, {"phase3", "study", name});
            const auto study_path =
                opts_.out / "cache" / (hex(fnv1a64(hash_ + "|phase3|" + name + "|" + hex(data_hash(tt.train)))) + ".study.json");

            json study;
            if (opts_.resume && std::filesystem::exists(study_path)) {
                study = read_report(study_path);
            } else {
                const auto t0 = std::chrono::steady_clock::now();
                StudyResult result;
                if (space.params.empty()) {
                    result.best_objective = holdout_objective(base, tt.train, study_seed);
                    result.best_trial = 0;
                    result.history.push_back({{}, result.best_objective, 0, 0.0, {}});
                } else {
                    result = run_study(
                        [&](const ParamMap& p) {
                            PipelineConfig c = base;
                            for (const auto& [k, v] : p) c.model.hyperparams[k] = v;
                            return holdout_objective(c, tt.train, study_seed);
                        },
                        space, cfg_.n_trials, study_seed);
                }
                tune_s[m] = seconds_since(t0);
                study = {{"best_params", to_json(result.best_params)},
                         {"best_objective", result.best_objective},
                         {"best_trial", result.best_trial},
                         {"trials", json::array()}};
                for (const auto& t : result.history) {
                    json tr = {{"trial", t.trial_index}, {"objective", t.objective}, {"params", to_json(t.params)}};
                    if (!t.error.empty()) tr["error"] = t.error;
                    study["trials"].push_back(tr);
                }
                std::filesystem::create_directories(study_path.parent_path());
                std::ofstream(study_path) << study.dump() << "\n";
            }
            for (auto tr : study.at("trials")) {
                tr["model"] = name;
                trials[m].push_back(tr);
            }
            PipelineConfig best = base;
            best.model.hyperparams = params_from_json(study.at("best_params"));
            const auto fitted = fit_cached("phase3", best, tt.train);
            const auto metrics = evaluate_paired(fitted, tt.test);
            row.update(metrics_json(metrics));
            row["best_params"] = study.at("best_params");
            row["validation_objective"] = study.at("best_objective");
            const auto [lo, hi] = wilson_ci(successes_from_rate(metrics.overall_accuracy, n_test), n_test);
            row["wilson_lo"] = lo;
            row["wilson_hi"] = hi;
        } catch (const Error& e) {
            row["error"] = e.what();
        }
        rows[m] = std::move(row);
    });
    for (std::size_t m = 0; m < rows.size(); ++m) {
        rep.add_row("models", rows[m]);
        for (const auto& t : trials[m]) rep.add_row("trials", t);
        rep.time("tune/" + cfg_.models[m], tune_s[m]);
    }
    rep.note("Wilson intervals use successes = round(OA * n_test) with halves rounded up");
    return rep;
}

Report Runner::phase4() {
    const json p2 = ensure("phase2");
    const json p3 = ensure("phase3");
    Report rep("phase4", cfg_, dataset().provenance);
    auto [balance, use_pca] = best_preprocessing(p2);
    if (balance == BalanceKind::stratified_resplit) {
        rep.note("stratified resplit reassigns the fixed split and has no per-fold meaning; folds train on their own "
                 "partition unchanged");
        balance = BalanceKind::original;
    }
    const auto& d = dataset();
    std::vector<std::size_t> pooled;
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
        if (d.samples[i].split != Split::unassigned) pooled.push_back(i);
    }
    const auto data = labeled(d, features(std::nullopt).X, pooled);
    const auto fold_seed = derive_seed(cfg_.global_seed, {"phase4", "folds"});

    const auto M = cfg_.models.size();
    std::vector<FoldScores> scores(M);
    std::vector<std::string> errors(M);
    for (std::size_t m = 0; m < M; ++m) {
        const auto& name = cfg_.models[m];
        PipelineConfig pc;
        pc.balance.kind = balance;
        pc.use_pca = use_pca;
        pc.pca_variance_target = cfg_.pca_variance;
        pc.model = {name, tuned_params(p3, name), 0};
        pc.seed = derive_seed(cfg_.global_seed, {"phase4", name});
        const auto t0 = std::chrono::steady_clock::now();
        try {
            scores[m] = cross_validate(pc, data, cfg_.cv_k, fold_seed);
        } catch (const Error& e) {
            errors[m] = e.what();
        }
        rep.time("cv/" + name, seconds_since(t0));
    }

    std::vector<std::size_t> ok;
    for (std::size_t m = 0; m < M; ++m) {
        const auto& name = cfg_.models[m];
        json row = {{"model", name}};
        if (!errors[m].empty()) {
            row["error"] = errors[m];
            rep.add_row("models", row);
            continue;
        }
        ok.push_back(m);
        const auto& s = scores[m];
        row["k"] = s.k;
        if (!s.warning.empty()) rep.note(name + ": " + s.warning);
        for (const auto& [metric, sum] : s.summary) {
            row[metric + "_mean"] = sum.mean;
            row[metric + "_std"] = sum.std;
            row[metric + "_ci_lo"] = sum.ci_lo;
            row[metric + "_ci_hi"] = sum.ci_hi;
            row[metric + "_cv"] = sum.cv_coefficient;
        }
        // Wilson intervals on pooled out-of-fold predictions.
        std::int64_t hit_r = 0, hit_f = 0, n_f = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            hit_r += s.oof_ripeness[i] == data.ripeness[i];
            if (data.firmness[i] != static_cast<int>(FirmnessClass::unknown)) {
                ++n_f;
                hit_f += s.oof_firmness[i] == data.firmness[i];
            }
        }
        const auto [rlo, rhi] = wilson_ci(hit_r, static_cast<std::int64_t>(data.size()));
        row["oof_acc_r_wilson_lo"] = rlo;
        row["oof_acc_r_wilson_hi"] = rhi;
        if (n_f > 0) {
            const auto [flo, fhi] = wilson_ci(hit_f, n_f);
            row["oof_acc_f_wilson_lo"] = flo;
            row["oof_acc_f_wilson_hi"] = fhi;
        }
        rep.add_row("models", row);
        for (std::size_t f = 0; f < s.per_fold.size(); ++f) {
            json fr = metrics_json(s.per_fold[f]);
            fr["model"] = name;
            fr["fold"] = f;
            rep.add_row("folds", fr);
        }
    }

    auto& stats = rep.summary();
    stats["cv_k"] = cfg_.cv_k;
    stats["preprocessing"] = {{"balance", to_string(balance)}, {"pca", use_pca}};
    if (ok.size() < 2) {
        rep.note("rank statistics need at least 2 successful models");
        return rep;
    }
    const auto k = static_cast<Eigen::Index>(scores[ok.front()].per_fold.size());
    Matrix f1(static_cast<Eigen::Index>(ok.size()), k);
    std::vector<double> mean_r, mean_f;
    for (std::size_t i = 0; i < ok.size(); ++i) {
        const auto& s = scores[ok[i]];
        for (Eigen::Index f = 0; f < k; ++f) f1(static_cast<Eigen::Index>(i), f) = s.per_fold[static_cast<std::size_t>(f)].mean_f1_macro;
        mean_r.push_back(s.summary.at("acc_r").mean);
        mean_f.push_back(s.summary.at("acc_f").mean);
    }
    rep.note("Friedman and Nemenyi use per-fold mean macro-F1 over both tasks");
    const auto fr = friedman(f1);
    json ranks = json::object();
    for (std::size_t i = 0; i < ok.size(); ++i) ranks[cfg_.models[ok[i]]] = fr.mean_ranks[i];
    stats["friedman"] = {{"chi2", fr.chi2}, {"dof", fr.dof}, {"p", fr.p}, {"mean_ranks", ranks}};
    try {
        const auto nm = nemenyi(f1);
        json pairs = json::array();
        for (std::size_t a = 0; a < ok.size(); ++a)
            for (std::size_t b = a + 1; b < ok.size(); ++b)
                if (nm.significant[a][b]) pairs.push_back({cfg_.models[ok[a]], cfg_.models[ok[b]]});
        stats["nemenyi"] = {{"q", nm.q},
                            {"critical_difference", nm.critical_difference},
                            {"significant_pairs", pairs},
                            {"n_significant", pairs.size()}};
    } catch (const UnsupportedError& e) {
        rep.note(std::string("Nemenyi skipped: ") + e.what());
    }
    try {
        stats["cohen_d_firmness_vs_ripeness"] = cohen_d_paired(mean_f, mean_r);
    } catch (const DegenerateError& e) {
        rep.note(std::string("Cohen's d skipped: ") + e.what());
    }
    return rep;
}

Report Runner::phase5() {
    const json p2 = ensure("phase2");
    const json p3 = ensure("phase3");
    Report rep("phase5", cfg_, dataset().provenance);
    const auto use_pca = best_preprocessing(p2).second;
    const auto ranked = ranked_models(p3);
    const auto n_base = std::min(cfg_.ensemble.top, ranked.size());
    if (n_base < 2) {
        rep.note("ensembles need at least 2 successfully tuned models");
        return rep;
    }
    std::vector<PipelineConfig> bases;
    json names = json::array();
    for (std::size_t i = 0; i < n_base; ++i) {
        PipelineConfig pc;
        pc.use_pca = use_pca;
        pc.pca_variance_target = cfg_.pca_variance;
        pc.model = {ranked[i].first, tuned_params(p3, ranked[i].first), 0};
        pc.seed = derive_seed(cfg_.global_seed, {"phase5", ranked[i].first});
        bases.push_back(pc);
        names.push_back(ranked[i].first);
    }
    rep.summary()["base_models"] = names;
    rep.summary()["best_single"] = {{"model", ranked.front().first}, {"overall_accuracy", ranked.front().second}};
    rep.summary()["pca"] = use_pca;

    struct Job {
        BalanceKind condition;
        EnsembleKind kind;
    };
    std::vector<Job> jobs;
    for (auto cond : {BalanceKind::original, BalanceKind::stratified_resplit})
        for (auto kind : cfg_.ensemble.kinds) jobs.push_back({cond, kind});
    std::map<BalanceKind, TrainTest> splits;
    splits.emplace(BalanceKind::original, split(BalanceKind::original));
    splits.emplace(BalanceKind::stratified_resplit, split(BalanceKind::stratified_resplit));

    std::vector<json> rows(jobs.size());
    std::vector<double> fit_s(jobs.size(), 0.0);
    parallel_for(jobs.size(), [&](std::size_t j) {
        const auto& job = jobs[j];
        const auto& tt = splits.at(job.condition);
        json row = {{"kind", to_string(job.kind)}, {"condition", to_string(job.condition)}};
        try {
            EnsembleSpec spec;
            spec.kind = job.kind;
            spec.base = bases;
            spec.oof_folds = cfg_.ensemble.oof_folds;
            spec.holdout_frac = cfg_.ensemble.holdout_frac;
            spec.seed = derive_seed(cfg_.global_seed, {"phase5", to_string(job.kind), to_string(job.condition)});
            spec.meta = {cfg_.ensemble.meta, {}, derive_seed(spec.seed, {"meta"})};
            const auto t0 = std::chrono::steady_clock::now();
            const auto er = fit_ensemble(spec, tt.train.X, tt.train.ripeness);
            const auto ef = fit_ensemble(spec, tt.train.X, tt.train.firmness);
            fit_s[j] = seconds_since(t0);
            const auto m = score_tasks(tt.test.ripeness, er.predict(tt.test.X), tt.test.firmness, ef.predict(tt.test.X));
            row.update(metrics_json(m));
            row["delta_vs_best_single_pp"] = 100.0 * (m.overall_accuracy - ranked.front().second);
            std::set<std::string> flags(er.flags().begin(), er.flags().end());
            flags.insert(ef.flags().begin(), ef.flags().end());
            row["flags"] = std::vector<std::string>(flags.begin(), flags.end());
        } catch (const Error& e) {
            row["error"] = e.what();
        }
        rows[j] = std::move(row);
    });
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        rep.add_row("ensembles", rows[j]);
        rep.time("fit/" + to_string(jobs[j].kind) + "/" + to_string(jobs[j].condition), fit_s[j]);
    }
    return rep;
}

Report Runner::phase6() {
    Report rep("phase6", cfg_, dataset().provenance);
    const auto& ex = cfg_.explain;
    BalanceKind balance = BalanceKind::original;
    if (auto p2 = existing("phase2")) balance = best_preprocessing(*p2).first;
    else rep.note("no phase2 report for this config; explaining the original split");
    ParamMap params;
    if (auto p3 = existing("phase3")) params = tuned_params(*p3, ex.model);
    else rep.note("no phase3 report for this config; explaining default hyperparameters");

    const auto tt = split(balance);
    const auto& table = features(std::nullopt);
    const auto& grid = dataset().grid;
    PipelineConfig pc;
    pc.balance.kind = balance;
    pc.model = {ex.model, params, 0};
    pc.seed = derive_seed(cfg_.global_seed, {"phase6", ex.model});
    rep.note("importances are computed without PCA so they map back to bands");
    const auto fitted = fit_cached("phase6", pc, tt.train);

    std::string source = ex.source;
    if (source == "impurity" && !ModelRegistry::global().get(ex.model).native_importance) {
        rep.note(ex.model + " has no impurity importance; using permutation importance");
        source = "permutation";
    }
    auto importance = [&](const FittedPipeline& p, const Labels& y, const char* task) -> Vector {
        if (source == "impurity") return *p.model().importance();
        return permutation_importance(p, tt.test.X, y, ex.metric, ex.n_repeats,
                                      derive_seed(cfg_.global_seed, {"phase6", "permutation", task}));
    };
    const Vector imp_r = importance(fitted.ripeness, tt.test.ripeness, "ripeness");
    const Vector imp_f = importance(fitted.firmness, tt.test.firmness, "firmness");
    const Vector band_r = band_importance(imp_r, table.group_map, grid.size());
    const Vector band_f = band_importance(imp_f, table.group_map, grid.size());
    const auto [roll_r, sd_r] = rolling_band_importance(band_r, ex.window);
    const auto [roll_f, sd_f] = rolling_band_importance(band_f, ex.window);
    for (std::size_t b = 0; b < grid.size(); ++b) {
        const auto i = static_cast<Eigen::Index>(b);
        rep.add_row("band_importance", {{"band", b},
                                        {"wavelength_nm", grid[b]},
                                        {"ripeness", band_r[i]},
                                        {"firmness", band_f[i]},
                                        {"ripeness_rolling_mean", roll_r[i]},
                                        {"ripeness_rolling_std", sd_r[i]},
                                        {"firmness_rolling_mean", roll_f[i]},
                                        {"firmness_rolling_std", sd_f[i]}});
    }
    for (auto t : kTransformOrder) {
        double r = 0.0, f = 0.0;
        for (auto c : group_columns(table.group_map, t)) {
            r += imp_r[static_cast<Eigen::Index>(c)];
            f += imp_f[static_cast<Eigen::Index>(c)];
        }
        rep.add_row("group_importance", {{"group", to_string(t)}, {"ripeness", r}, {"firmness", f}});
    }

    try {
        const auto sel = consensus_bands(band_r, band_f, grid, ex.cutoff_nm, ex.top_n);
        for (std::size_t i = 0; i < sel.band_indices.size(); ++i) {
            rep.add_row("consensus", {{"band", sel.band_indices[i]},
                                      {"wavelength_nm", sel.wavelengths_nm[i]},
                                      {"joint_rank", sel.joint_ranks[i]}});
        }
        rep.summary()["consensus_bands"] = sel.band_indices;
        rep.summary()["consensus_wavelengths_nm"] = sel.wavelengths_nm;
    } catch (const CapacityError& e) {
        rep.note(std::string("consensus selection skipped: ") + e.what());
    }
    rep.note("consensus = lowest rank sum over the two tasks among bands below the cutoff");

    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& g : group_ablation(pc, tt.train, tt.test, table.group_map)) {
        rep.add_row("ablation", {{"group", to_string(g.group)},
                                 {"drop_ripeness_pct", g.drop_ripeness},
                                 {"drop_firmness_pct", g.drop_firmness},
                                 {"drop_overall_pct", g.drop_overall}});
    }
    rep.time("ablation", seconds_since(t0));
    rep.summary()["model"] = ex.model;
    rep.summary()["importance_source"] = source;
    rep.summary()["balance"] = to_string(balance);
    return rep;
}

Report Runner::bands() {
    Report rep("bands", cfg_, dataset().provenance);
    std::pair<BalanceKind, bool> prep;
    if (cfg_.bands_preprocessing) {
        prep = *cfg_.bands_preprocessing;
    } else {
        prep = best_preprocessing(ensure("phase2"));
    }
    const auto [balance, use_pca] = prep;
    rep.summary()["preprocessing"] = {{"balance", to_string(balance)}, {"pca", use_pca}};
    const auto full = split(balance);

    for (const auto& subset : cfg_.band_subsets) {
        const auto sub = split(balance, subset);
        json info = {{"name", subset.name}, {"indices", subset.indices}, {"n_features", sub.train.X.cols()}};
        json nm = json::array();
        for (auto b : subset.indices) nm.push_back(dataset().grid[b]);
        info["wavelengths_nm"] = nm;
        rep.summary()["subsets"].push_back(info);

        std::vector<json> rows(cfg_.models.size());
        parallel_for(cfg_.models.size(), [&](std::size_t m) {
            const auto& name = cfg_.models[m];
            json row = {{"subset", subset.name}, {"model", name}};
            try {
                PipelineConfig pc;
                pc.balance.kind = balance;
                pc.use_pca = use_pca;
                pc.pca_variance_target = cfg_.pca_variance;
                pc.model = {name, {}, 0};
                pc.seed = derive_seed(cfg_.global_seed, {"bands", name});
                const auto m_sub = evaluate_paired(fit_cached("bands", pc, sub.train), sub.test);
                const auto m_full = evaluate_paired(fit_cached("bands", pc, full.train), full.test);
                row.update(metrics_json(m_sub));
                row["full_overall_accuracy"] = m_full.overall_accuracy;
                row["recovery"] = m_full.overall_accuracy > 0.0 ? json(m_sub.overall_accuracy / m_full.overall_accuracy)
                                                                : json(nullptr);
            } catch (const Error& e) {
                row["error"] = e.what();
            }
            rows[m] = std::move(row);
        });
        for (auto& r : rows) rep.add_row("models", std::move(r));
    }
    rep.note("subset and full-spectrum runs share preprocessing, default hyperparameters and seeds");
    return rep;
}

Report Runner::synth() {
    if (!cfg_.synth) throw ConfigError("the synth phase needs a 'synth' section in the config");
    const auto& d = dataset();
    Report rep("synth", cfg_, d.provenance);
    std::filesystem::create_directories(opts_.out);
    write_feature_table(d, opts_.out / "synth_table.csv");
    write_manifest({d.grid, d.camera}, opts_.out / "synth_manifest.json");
    rep.summary()["table"] = "synth_table.csv";
    rep.summary()["manifest"] = "synth_manifest.json";
    rep.summary()["n_samples"] = d.samples.size();
    rep.summary()["band_count"] = d.grid.size();
    return rep;
}

Report Runner::validate() {
    const auto& d = dataset();
    Report rep("validate", cfg_, d.provenance);
    std::map<std::tuple<std::string, std::string, std::string, std::string>, int> counts;
    for (const auto& s : d.samples) {
        ++counts[{to_string(s.split), s.fruit.name(), to_string(s.ripeness), to_string(s.firmness_class())}];
    }
    for (const auto& [key, n] : counts) {
        const auto& [split_name, fruit, ripeness, firmness] = key;
        rep.add_row("counts", {{"split", split_name}, {"fruit", fruit}, {"ripeness", ripeness}, {"firmness", firmness}, {"n", n}});
    }
    rep.summary()["valid"] = true;
    rep.summary()["n_samples"] = d.samples.size();
    rep.summary()["n_train"] = d.count(Split::train);
    rep.summary()["n_test"] = d.count(Split::test);
    rep.summary()["band_count"] = d.grid.size();
    rep.summary()["wavelength_range_nm"] = {d.grid[0], d.grid[d.grid.size() - 1]};
    rep.summary()["camera"] = d.camera;
    return rep;
}

}  // namespace spectrabench::cli
