#include "spectrabench/tune.hpp"

#include "spectrabench/error.hpp"
#include "spectrabench/rng.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace spectrabench {

namespace {

struct Bounds {
    double lo = 0.0;
    double hi = 0.0;
};

// Internal coordinates: log for log domains, integers widened by half a step.
Bounds internal_bounds(const Domain& d) {
    if (const auto* r = std::get_if<IntRange>(&d)) {
        if (r->log) return {std::log(static_cast<double>(r->lo)), std::log(static_cast<double>(r->hi))};
        return {static_cast<double>(r->lo) - 0.5, static_cast<double>(r->hi) + 0.5};
    }
    const auto& r = std::get<RealRange>(d);
    if (r.log) return {std::log(r.lo), std::log(r.hi)};
    return {r.lo, r.hi};
}

double to_internal(const Domain& d, const ParamValue& v) {
    double x = std::holds_alternative<std::int64_t>(v) ? static_cast<double>(std::get<std::int64_t>(v))
                                                        : std::get<double>(v);
    const bool log = std::holds_alternative<IntRange>(d) ? std::get<IntRange>(d).log : std::get<RealRange>(d).log;
    return log ? std::log(x) : x;
}

ParamValue from_internal(const Domain& d, double u) {
    if (const auto* r = std::get_if<IntRange>(&d)) {
        const double x = r->log ? std::exp(u) : u;
        return std::clamp(static_cast<std::int64_t>(std::llround(x)), r->lo, r->hi);
    }
    const auto& r = std::get<RealRange>(d);
    return std::clamp(r.log ? std::exp(u) : u, r.lo, r.hi);
}

std::size_t category_index(const Categorical& c, const ParamValue& v) {
    for (std::size_t i = 0; i < c.choices.size(); ++i) {
        if (c.choices[i] == v) return i;
    }
    return c.choices.size();
}

// Mixture of Gaussians truncated to [lo, hi], one per observation plus a broad prior.
struct Parzen {
    std::vector<double> mu, sigma, weight;
    Bounds b;

    Parzen(std::vector<double> obs, Bounds bounds) : b(bounds) {
        const double span = b.hi - b.lo;
        if (span <= 0.0) {
            mu = {b.lo};
            sigma = {1.0};
            weight = {1.0};
            return;
        }
        obs.push_back((b.lo + b.hi) / 2.0);  // prior
        std::vector<std::size_t> order(obs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return obs[x] < obs[y]; });
        const double min_sigma = span / std::min(100.0, static_cast<double>(obs.size()));
        mu.resize(obs.size());
        sigma.resize(obs.size());
        weight.assign(obs.size(), 1.0 / static_cast<double>(obs.size()));
        for (std::size_t r = 0; r < order.size(); ++r) {
            const std::size_t i = order[r];
            const double left = r > 0 ? obs[i] - obs[order[r - 1]] : obs[i] - b.lo;
            const double right = r + 1 < order.size() ? obs[order[r + 1]] - obs[i] : b.hi - obs[i];
            mu[i] = obs[i];
            sigma[i] = std::clamp(std::max(left, right), min_sigma, span);
        }
        sigma.back() = span;  // the prior stays broad
    }

    double sample(Rng& rng) const {
        const double span = b.hi - b.lo;
        if (span <= 0.0) return b.lo;
        double pick = rng.uniform();
        std::size_t i = 0;
        while (i + 1 < weight.size() && pick >= weight[i]) pick -= weight[i++];
        const boost::math::normal n(mu[i], sigma[i]);
        const double clo = boost::math::cdf(n, b.lo);
        const double chi = boost::math::cdf(n, b.hi);
        if (!(chi - clo > 1e-300)) return std::clamp(mu[i], b.lo, b.hi);
        const double u = clo + rng.uniform() * (chi - clo);
        const double q = u <= 0.0 || u >= 1.0 ? mu[i] : boost::math::quantile(n, u);
        return std::clamp(q, b.lo, b.hi);
    }

    double log_pdf(double x) const {
        const double span = b.hi - b.lo;
        if (span <= 0.0) return 0.0;
        double total = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const boost::math::normal n(mu[i], sigma[i]);
            const double mass = boost::math::cdf(n, b.hi) - boost::math::cdf(n, b.lo);
            if (mass <= 0.0) continue;
            total += weight[i] * boost::math::pdf(n, x) / mass;
        }
        return std::log(std::max(total, std::numeric_limits<double>::min()));
    }
};

struct CategoricalDensity {
    std::vector<double> p;

    CategoricalDensity(const std::vector<std::size_t>& obs, std::size_t n_choices) : p(n_choices, 1.0) {
        for (auto i : obs) {
            if (i < n_choices) p[i] += 1.0;
        }
        double s = 0.0;
        for (double v : p) s += v;
        for (double& v : p) v /= s;
    }

    std::size_t sample(Rng& rng) const {
        double pick = rng.uniform();
        std::size_t i = 0;
        while (i + 1 < p.size() && pick >= p[i]) pick -= p[i++];
        return i;
    }
};

}  // namespace

ParamMap sample_uniform(const SearchSpace& space, std::uint64_t seed) {
    Rng rng(seed);
    ParamMap out;
    for (const auto& [name, domain] : space.params) {
        if (const auto* c = std::get_if<Categorical>(&domain)) {
            out[name] = c->choices[static_cast<std::size_t>(rng.below(c->choices.size()))];
        } else {
            const auto b = internal_bounds(domain);
            out[name] = from_internal(domain, b.lo + rng.uniform() * (b.hi - b.lo));
        }
    }
    return out;
}

ParamMap suggest(const std::vector<TrialRecord>& history, const SearchSpace& space, std::uint64_t seed,
                 int trial_index, const TpeSettings& settings) {
    const std::uint64_t trial_seed = derive_seed(seed, {"tpe", trial_index});
    if (history.size() < static_cast<std::size_t>(std::max(1, settings.n_startup))) {
        return sample_uniform(space, trial_seed);
    }

    std::vector<std::size_t> order(history.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return history[a].objective > history[b].objective; });
    const auto n_good = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(settings.gamma * static_cast<double>(history.size()))));
    const std::vector<std::size_t> good(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_good));
    const std::vector<std::size_t> bad(order.begin() + static_cast<std::ptrdiff_t>(n_good), order.end());

    Rng rng(trial_seed);
    std::vector<ParamMap> candidates(static_cast<std::size_t>(std::max(1, settings.n_candidates)));
    std::vector<double> score(candidates.size(), 0.0);

    for (const auto& [name, domain] : space.params) {
        if (const auto* c = std::get_if<Categorical>(&domain)) {
            auto collect = [&](const std::vector<std::size_t>& set) {
                std::vector<std::size_t> idx;
                for (auto t : set) {
                    const auto it = history[t].params.find(name);
                    if (it != history[t].params.end()) idx.push_back(category_index(*c, it->second));
                }
                return idx;
            };
            const CategoricalDensity l(collect(good), c->choices.size());
            const CategoricalDensity g(collect(bad), c->choices.size());
            for (std::size_t k = 0; k < candidates.size(); ++k) {
                const auto i = l.sample(rng);
                candidates[k][name] = c->choices[i];
                score[k] += std::log(l.p[i]) - std::log(g.p[i]);
            }
        } else {
            const auto b = internal_bounds(domain);
            auto collect = [&](const std::vector<std::size_t>& set) {
                std::vector<double> xs;
                for (auto t : set) {
                    const auto it = history[t].params.find(name);
                    if (it != history[t].params.end() && !std::holds_alternative<std::string>(it->second)) {
                        xs.push_back(std::clamp(to_internal(domain, it->second), b.lo, b.hi));
                    }
                }
                return xs;
            };
            const Parzen l(collect(good), b);
            const Parzen g(collect(bad), b);
            for (std::size_t k = 0; k < candidates.size(); ++k) {
                const double u = l.sample(rng);
                candidates[k][name] = from_internal(domain, u);
                score[k] += l.log_pdf(u) - g.log_pdf(u);
            }
        }
    }
    const auto best = std::max_element(score.begin(), score.end()) - score.begin();
    return candidates[static_cast<std::size_t>(best)];
}

StudyResult run_study(const Objective& objective, const SearchSpace& space, int n_trials, std::uint64_t seed,
                      const TpeSettings& settings) {
    space.validate();
    StudyResult out;
    out.best_objective = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < n_trials; ++t) {
        TrialRecord rec;
        rec.trial_index = t;
        rec.params = suggest(out.history, space, seed, t, settings);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            rec.objective = objective(rec.params);
            if (!std::isfinite(rec.objective)) {
                rec.error = "non-finite objective";
                rec.objective = 0.0;
            }
        } catch (const std::exception& e) {
            rec.objective = 0.0;
            rec.error = e.what();
        }
        rec.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (rec.objective > out.best_objective) {
            out.best_objective = rec.objective;
            out.best_params = rec.params;
            out.best_trial = t;
        }
        out.history.push_back(std::move(rec));
    }
    if (n_trials <= 0) out.best_objective = 0.0;
    return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(const Labels& y, double train_fraction,
                                                                            std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DomainError("train fraction must lie in (0, 1)");
    Rng rng(derive_seed(seed, {"holdout"}));
    std::vector<std::size_t> train, valid;
    for (int c : unique_labels(y)) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] == c) members.push_back(i);
        }
        rng.shuffle(members);
        const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
        for (std::size_t j = 0; j < members.size(); ++j) (j < n_train ? train : valid).push_back(members[j]);
    }
    std::sort(train.begin(), train.end());
    std::sort(valid.begin(), valid.end());
    return {train, valid};
}

double holdout_objective(const PipelineConfig& cfg, const LabeledFeatures& train, std::uint64_t seed) {
    const auto [fit_rows, valid_rows] = holdout_split(train.ripeness, 0.7, seed);
    if (valid_rows.empty()) throw DomainError("validation split is empty");
    const auto model = fit_paired(cfg, train.rows(fit_rows));
    return evaluate_paired(model, train.rows(valid_rows)).mean_f1_macro;
}

OptimizeResult optimize(const PipelineConfig& base, const SearchSpace& space, const LabeledFeatures& train,
                        int n_trials, std::uint64_t seed, const TpeSettings& settings) {
    if (train.size() == 0) throw DomainError("optimize needs training data");
    auto with_params = [&](const ParamMap& p) {
        PipelineConfig cfg = base;
        for (const auto& [k, v] : p) cfg.model.hyperparams[k] = v;
        return cfg;
    };
    OptimizeResult out;
    out.study = run_study(
        [&](const ParamMap& p) { return holdout_objective(with_params(p), train, seed); }, space, n_trials, seed,
        settings);
    out.best_config = with_params(out.study.best_params);
    out.final_model = fit_paired(out.best_config, train);
    return out;
}

}  // namespace spectrabench
