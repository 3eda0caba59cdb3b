#include "spectrabench/ensemble.hpp"

#include "spectrabench/error.hpp"
#include "spectrabench/evaluate.hpp"
#include "spectrabench/parallel.hpp"
#include "spectrabench/rng.hpp"
#include "spectrabench/tune.hpp"

#include <algorithm>
#include <map>

namespace spectrabench {

std::string to_string(EnsembleKind k) {
    switch (k) {
        case EnsembleKind::hard_vote: return "hard_vote";
        case EnsembleKind::soft_vote: return "soft_vote";
        case EnsembleKind::stacking: return "stacking";
        case EnsembleKind::blending: return "blending";
    }
    return "?";
}

EnsembleKind parse_ensemble_kind(const std::string& name) {
    for (auto k : {EnsembleKind::hard_vote, EnsembleKind::soft_vote, EnsembleKind::stacking, EnsembleKind::blending}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown ensemble kind: " + name);
}

void EnsembleSpec::validate() const {
    if (base.size() < 2) throw ConfigError("an ensemble needs at least 2 base learners");
    if (!(holdout_frac > 0.0 && holdout_frac < 1.0)) throw ConfigError("holdout_frac must lie in (0, 1)");
    if (oof_folds < 2) throw ConfigError("oof_folds must be >= 2");
}

namespace {

Matrix one_hot(std::size_t rows, const Labels& classes, int label) {
    Matrix P = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(classes.size()));
    const auto j = std::find(classes.begin(), classes.end(), label) - classes.begin();
    P.col(j).setOnes();
    return P;
}

std::vector<FittedPipeline> fit_bases(const std::vector<PipelineConfig>& cfgs, const Matrix& X, const Labels& y) {
    std::vector<std::optional<FittedPipeline>> slots(cfgs.size());
    parallel_for(cfgs.size(), [&](std::size_t b) { slots[b] = fit_pipeline(cfgs[b], X, y); });
    std::vector<FittedPipeline> out;
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

// Concatenated aligned probabilities; a base without distinct classes in its train part
// contributes one-hot rows.
Matrix meta_block(const std::vector<PipelineConfig>& cfgs, const Matrix& X_fit, const Labels& y_fit,
                  const Matrix& X_out, const Labels& classes, std::uint64_t seed) {
    const auto K = static_cast<Eigen::Index>(classes.size());
    Matrix block(X_out.rows(), K * static_cast<Eigen::Index>(cfgs.size()));
    const auto present = unique_labels(y_fit);
    parallel_for(cfgs.size(), [&](std::size_t b) {
        const auto col = static_cast<Eigen::Index>(b) * K;
        if (present.size() < 2) {
            block.middleCols(col, K) = one_hot(static_cast<std::size_t>(X_out.rows()), classes, present.front());
            return;
        }
        PipelineConfig cfg = cfgs[b];
        cfg.seed = derive_seed(seed, {"meta", b, cfgs[b].seed});
        block.middleCols(col, K) = fit_pipeline(cfg, X_fit, y_fit).predict_proba_aligned(X_out, classes);
    });
    return block;
}

}  // namespace

FittedEnsemble fit_ensemble(const EnsembleSpec& spec, const Matrix& X, const Labels& y) {
    spec.validate();
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw ShapeError("features and labels misaligned");
    FittedEnsemble e;
    e.spec_ = spec;
    e.classes_ = unique_labels(y);
    if (e.classes_.empty()) throw DomainError("cannot fit an ensemble on an empty training set");
    if (e.classes_.size() == 1) {
        e.constant_ = e.classes_.front();
        return e;
    }

    if (spec.kind == EnsembleKind::stacking) {
        std::map<int, std::size_t> counts;
        for (int c : y) ++counts[c];
        std::size_t smallest = y.size();
        for (const auto& [c, n] : counts) smallest = std::min(smallest, n);
        const int folds = std::max(2, std::min(spec.oof_folds, static_cast<int>(smallest)));
        e.meta_fold_of_ = stratified_folds(y, folds, derive_seed(spec.seed, {"stacking"}));
        const auto K = static_cast<Eigen::Index>(e.classes_.size());
        e.meta_features_.resize(X.rows(), K * static_cast<Eigen::Index>(spec.base.size()));
        for (int f = 0; f < folds; ++f) {
            std::vector<std::size_t> fit_rows, out_rows;
            for (std::size_t i = 0; i < y.size(); ++i) (e.meta_fold_of_[i] == f ? out_rows : fit_rows).push_back(i);
            const Matrix block = meta_block(spec.base, select_rows(X, fit_rows), select(y, fit_rows),
                                            select_rows(X, out_rows), e.classes_,
                                            derive_seed(spec.seed, {"stacking_fold", f}));
            for (std::size_t r = 0; r < out_rows.size(); ++r) {
                e.meta_features_.row(static_cast<Eigen::Index>(out_rows[r])) = block.row(static_cast<Eigen::Index>(r));
            }
        }
        e.meta_ = fit_model(spec.meta, e.meta_features_, y);
        e.base_ = fit_bases(spec.base, X, y);
    } else if (spec.kind == EnsembleKind::blending) {
        const auto [fit_rows, hold_rows] = holdout_split(y, 1.0 - spec.holdout_frac, derive_seed(spec.seed, {"blending"}));
        if (hold_rows.empty() || fit_rows.empty()) throw DomainError("blending holdout split left a side empty");
        const Matrix X_fit = select_rows(X, fit_rows);
        const Labels y_fit = select(y, fit_rows);
        const Labels y_hold = select(y, hold_rows);
        if (unique_labels(y_fit).size() < 2) throw DegenerateError("blending base split holds a single class");
        e.base_ = fit_bases(spec.base, X_fit, y_fit);
        e.meta_features_ = e.stacked(select_rows(X, hold_rows));
        if (unique_labels(y_hold).size() < 2) {
            e.meta_constant_ = y_hold.front();
        } else {
            e.meta_ = fit_model(spec.meta, e.meta_features_, y_hold);
        }
    } else {
        e.base_ = fit_bases(spec.base, X, y);
    }
    for (const auto& b : e.base_) {
        if (!b.model().calibrated()) e.flags_.push_back(b.model().spec().name + ": uncalibrated probabilities");
    }
    return e;
}

Matrix FittedEnsemble::stacked(const Matrix& X) const {
    const auto K = static_cast<Eigen::Index>(classes_.size());
    Matrix out(X.rows(), K * static_cast<Eigen::Index>(base_.size()));
    for (std::size_t b = 0; b < base_.size(); ++b) {
        out.middleCols(static_cast<Eigen::Index>(b) * K, K) = base_[b].predict_proba_aligned(X, classes_);
    }
    return out;
}

Matrix FittedEnsemble::predict_proba(const Matrix& X) const {
    const auto K = static_cast<Eigen::Index>(classes_.size());
    if (constant_) return one_hot(static_cast<std::size_t>(X.rows()), classes_, *constant_);
    switch (spec_.kind) {
        case EnsembleKind::hard_vote: {
            Matrix votes = Matrix::Zero(X.rows(), K);
            for (const auto& b : base_) {
                const Labels p = b.predict(X);
                for (Eigen::Index i = 0; i < X.rows(); ++i) {
                    const auto j = std::find(classes_.begin(), classes_.end(), p[static_cast<std::size_t>(i)]) -
                                   classes_.begin();
                    votes(i, j) += 1.0;
                }
            }
            return votes / static_cast<double>(base_.size());
        }
        case EnsembleKind::soft_vote: {
            Matrix mean = Matrix::Zero(X.rows(), K);
            for (const auto& b : base_) mean += b.predict_proba_aligned(X, classes_);
            return mean / static_cast<double>(base_.size());
        }
        case EnsembleKind::stacking:
        case EnsembleKind::blending: {
            if (meta_constant_) return one_hot(static_cast<std::size_t>(X.rows()), classes_, *meta_constant_);
            const Matrix P = meta_->predict_proba(stacked(X));
            Matrix out = Matrix::Zero(X.rows(), K);
            const auto& mc = meta_->classes();
            for (std::size_t j = 0; j < mc.size(); ++j) {
                const auto at = std::find(classes_.begin(), classes_.end(), mc[j]) - classes_.begin();
                out.col(at) = P.col(static_cast<Eigen::Index>(j));
            }
            return out;
        }
    }
    return {};
}

Labels FittedEnsemble::predict(const Matrix& X) const {
    const Matrix P = predict_proba(X);
    Labels out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = classes_[static_cast<std::size_t>(argmax_row(P, i))];
    }
    return out;
}

}  // namespace spectrabench
