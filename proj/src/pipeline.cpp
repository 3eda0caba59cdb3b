#include "spectrabench/pipeline.hpp"

#include "spectrabench/error.hpp"
#include "spectrabench/rng.hpp"

#include <algorithm>
#include <cmath>

namespace spectrabench {

ScalerModel fit_scaler(const Matrix& X) {
    if (X.rows() == 0 || X.cols() == 0) throw DomainError("cannot fit a scaler on an empty matrix");
    ScalerModel s;
    s.means = X.colwise().mean().transpose();
    s.stds = ((X.rowwise() - s.means.transpose()).array().square().colwise().sum() /
              static_cast<double>(X.rows()))
                 .sqrt()
                 .transpose();
    return s;
}

Matrix ScalerModel::transform(const Matrix& X) const {
    if (X.cols() != means.size()) throw ShapeError("scaler feature count mismatch");
    Matrix out = X.rowwise() - means.transpose();
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        if (stds[j] > 1e-12) out.col(j) /= stds[j];
    }
    return out;
}

PCAModel fit_pca(const Matrix& X, double variance_target) {
    if (!(variance_target > 0.0 && variance_target <= 1.0)) {
        throw DomainError("PCA variance target must lie in (0, 1]");
    }
    if (X.rows() < 2) throw DomainError("PCA needs at least 2 rows");
    PCAModel p;
    p.mean = X.colwise().mean().transpose();
    const Matrix Xc = X.rowwise() - p.mean.transpose();
    Eigen::BDCSVD<Matrix> svd(Xc, Eigen::ComputeThinV);
    const Vector var = svd.singularValues().array().square();
    const double total = var.sum();
    if (!(total > 1e-24)) throw DegenerateError("PCA on a rank-0 matrix (all rows identical)");

    const Vector ratio = var / total;
    int k = 0;
    double cum = 0.0;
    while (k < ratio.size()) {
        cum += ratio[k++];
        if (cum >= variance_target - 1e-12) break;
    }
    p.k = k;
    p.explained_variance_ratio = ratio.head(k);
    p.components = svd.matrixV().leftCols(k).transpose();
    for (int c = 0; c < k; ++c) {
        Eigen::Index at = 0;
        p.components.row(c).cwiseAbs().maxCoeff(&at);
        if (p.components(c, at) < 0.0) p.components.row(c) *= -1.0;
    }
    return p;
}

Matrix PCAModel::transform(const Matrix& X) const {
    if (X.cols() != mean.size()) throw ShapeError("PCA feature count mismatch");
    return (X.rowwise() - mean.transpose()) * components.transpose();
}

Matrix PCAModel::inverse_transform(const Matrix& scores) const {
    Matrix out = scores * components;
    out.rowwise() += mean.transpose();
    return out;
}

Matrix FittedPipeline::transform(const Matrix& X) const {
    Matrix Z = scaler_.transform(X);
    if (pca_) Z = pca_->transform(Z);
    return Z;
}

Labels FittedPipeline::predict(const Matrix& X) const { return model_.predict(transform(X)); }

Matrix FittedPipeline::predict_proba(const Matrix& X) const { return model_.predict_proba(transform(X)); }

Matrix FittedPipeline::predict_proba_aligned(const Matrix& X, const Labels& classes) const {
    const Matrix P = predict_proba(X);
    Matrix out = Matrix::Zero(P.rows(), static_cast<Eigen::Index>(classes.size()));
    const auto& own = model_.classes();
    for (std::size_t j = 0; j < own.size(); ++j) {
        const auto it = std::find(classes.begin(), classes.end(), own[j]);
        if (it == classes.end()) throw ShapeError("model class missing from the target class list");
        out.col(it - classes.begin()) = P.col(static_cast<Eigen::Index>(j));
    }
    return out;
}

namespace {
constexpr std::uint32_t kPipelineVersion = 1;
}

void FittedPipeline::save(ByteWriter& out) const {
    out.magic("SBP1");
    out.u32(kPipelineVersion);
    out.str(to_string(config_.balance.kind));
    out.i64(config_.balance.k_neighbors);
    out.u64(config_.balance.seed);
    out.boolean(config_.use_pca);
    out.f64(config_.pca_variance_target);
    out.u64(config_.seed);
    out.vec(scaler_.means);
    out.vec(scaler_.stds);
    out.boolean(pca_.has_value());
    if (pca_) {
        out.mat(pca_->components);
        out.vec(pca_->explained_variance_ratio);
        out.vec(pca_->mean);
    }
    model_.save(out);
}

FittedPipeline FittedPipeline::load(ByteReader& in) {
    in.expect_magic("SBP1");
    if (in.u32() != kPipelineVersion) throw ParseError("unsupported pipeline artifact version");
    FittedPipeline p;
    p.config_.balance.kind = parse_balance_kind(in.str());
    p.config_.balance.k_neighbors = static_cast<int>(in.i64());
    p.config_.balance.seed = in.u64();
    p.config_.use_pca = in.boolean();
    p.config_.pca_variance_target = in.f64();
    p.config_.seed = in.u64();
    p.scaler_.means = in.vec();
    p.scaler_.stds = in.vec();
    if (in.boolean()) {
        PCAModel pca;
        pca.components = in.mat();
        pca.explained_variance_ratio = in.vec();
        pca.mean = in.vec();
        pca.k = static_cast<int>(pca.components.rows());
        p.pca_ = std::move(pca);
    }
    p.model_ = FittedModel::load(in);
    p.config_.model = p.model_.spec();
    return p;
}

FittedPipeline fit_pipeline(const PipelineConfig& cfg, const Matrix& X, const Labels& y) {
    if (X.rows() == 0) throw DomainError("cannot fit a pipeline on an empty training set");
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw ShapeError("features and labels misaligned");
    if (!(cfg.pca_variance_target > 0.0 && cfg.pca_variance_target <= 1.0)) {
        throw ConfigError("pca_variance_target must lie in (0, 1]");
    }
    FittedPipeline p;
    p.config_ = cfg;
    p.config_.balance.seed = derive_seed(cfg.seed, {"balance"});
    p.config_.model.seed = derive_seed(cfg.seed, {"model"});

    const Balanced b = apply_balance(p.config_.balance, X, y);
    p.scaler_ = fit_scaler(b.X);
    Matrix Z = p.scaler_.transform(b.X);
    if (cfg.use_pca) {
        p.pca_ = fit_pca(Z, cfg.pca_variance_target);
        Z = p.pca_->transform(Z);
    }
    p.model_ = fit_model(p.config_.model, Z, b.y);
    return p;
}

}  // namespace spectrabench
