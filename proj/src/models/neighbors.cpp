#include "spectrabench/models/neighbors.hpp"

#include "spectrabench/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spectrabench {

void KnnModel::configure(const ParamMap& params, std::uint64_t) {
    k_ = static_cast<int>(param_int(params, "n_neighbors", 5));
    if (k_ < 1) throw ConfigError("n_neighbors must be >= 1");
    const auto weights = param_str(params, "weights", "uniform");
    if (weights != "uniform" && weights != "distance") {
        throw ConfigError("weights must be uniform or distance");
    }
    distance_weighted_ = weights == "distance";
    p_ = static_cast<int>(param_int(params, "p", 2));
    if (p_ != 1 && p_ != 2) throw ConfigError("p must be 1 or 2");
}

void KnnModel::fit(const Matrix& X, const std::vector<int>& y, int n_classes) {
    X_ = X;
    y_ = y;
    n_classes_ = n_classes;
}

Matrix KnnModel::predict_proba(const Matrix& X) const {
    const auto n_train = static_cast<std::size_t>(X_.rows());
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(k_), n_train);
    Matrix P = Matrix::Zero(X.rows(), n_classes_);
    std::vector<double> dist(n_train);
    std::vector<std::size_t> order(n_train);

    for (Eigen::Index q = 0; q < X.rows(); ++q) {
        for (std::size_t i = 0; i < n_train; ++i) {
            const auto diff = X_.row(static_cast<Eigen::Index>(i)) - X.row(q);
            dist[i] = p_ == 1 ? diff.cwiseAbs().sum() : diff.norm();
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto closer = [&](std::size_t a, std::size_t b) {
            return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
        };
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          closer);

        bool exact = false;
        if (distance_weighted_) {
            for (std::size_t j = 0; j < k; ++j) exact = exact || dist[order[j]] == 0.0;
        }
        for (std::size_t j = 0; j < k; ++j) {
            const auto i = order[j];
            double w = 1.0;
            if (distance_weighted_) w = exact ? (dist[i] == 0.0 ? 1.0 : 0.0) : 1.0 / dist[i];
            P(q, y_[i]) += w;
        }
        P.row(q) /= P.row(q).sum();
    }
    return P;
}

void KnnModel::save(ByteWriter& out) const {
    out.mat(X_);
    out.ints(y_);
    out.i64(n_classes_);
}

void KnnModel::load(ByteReader& in) {
    X_ = in.mat();
    y_ = in.ints();
    n_classes_ = static_cast<int>(in.i64());
}

void GaussianNbModel::configure(const ParamMap& params, std::uint64_t) {
    var_smoothing_ = param_real(params, "var_smoothing", 1e-9);
    if (!(var_smoothing_ >= 0.0)) throw ConfigError("var_smoothing must be >= 0");
}

void GaussianNbModel::fit(const Matrix& X, const std::vector<int>& y, int n_classes) {
    const auto F = X.cols();
    const auto n = static_cast<double>(X.rows());
    const Vector mean_all = X.colwise().mean();
    const double max_var =
        ((X.rowwise() - mean_all.transpose()).array().square().colwise().sum() / n).maxCoeff();
    epsilon_ = var_smoothing_ * max_var;

    means_ = Matrix::Zero(n_classes, F);
    variances_ = Matrix::Zero(n_classes, F);
    log_prior_ = Vector::Zero(n_classes);
    std::vector<double> counts(static_cast<std::size_t>(n_classes), 0.0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const auto c = y[static_cast<std::size_t>(i)];
        means_.row(c) += X.row(i);
        counts[static_cast<std::size_t>(c)] += 1.0;
    }
    for (int c = 0; c < n_classes; ++c) means_.row(c) /= counts[static_cast<std::size_t>(c)];
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const auto c = y[static_cast<std::size_t>(i)];
        variances_.row(c) += (X.row(i) - means_.row(c)).array().square().matrix();
    }
    for (int c = 0; c < n_classes; ++c) {
        const double nc = counts[static_cast<std::size_t>(c)];
        variances_.row(c) /= nc;
        log_prior_[c] = std::log(nc / n);
    }
    variances_.array() += epsilon_;
    if ((variances_.array() <= 0.0).any()) {
        throw DegenerateError("gaussian_nb: zero variance feature with no smoothing");
    }
}

Matrix GaussianNbModel::joint_log_likelihood(const Matrix& X) const {
    const auto K = means_.rows();
    Matrix J(X.rows(), K);
    constexpr double kTwoPi = 6.283185307179586;
    for (Eigen::Index c = 0; c < K; ++c) {
        const double log_norm = -0.5 * (kTwoPi * variances_.row(c).array()).log().sum();
        const auto inv = variances_.row(c).array().inverse();
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const double quad = ((X.row(i) - means_.row(c)).array().square() * inv).sum();
            J(i, c) = log_prior_[c] + log_norm - 0.5 * quad;
        }
    }
    return J;
}

Matrix GaussianNbModel::predict_proba(const Matrix& X) const {
    return softmax_rows(joint_log_likelihood(X));
}

void GaussianNbModel::save(ByteWriter& out) const {
    out.mat(means_);
    out.mat(variances_);
    out.vec(log_prior_);
    out.f64(epsilon_);
}

void GaussianNbModel::load(ByteReader& in) {
    means_ = in.mat();
    variances_ = in.mat();
    log_prior_ = in.vec();
    epsilon_ = in.f64();
}

void PlsDaModel::configure(const ParamMap& params, std::uint64_t) {
    n_components_ = static_cast<int>(param_int(params, "n_components", 2));
    if (n_components_ < 1) throw ConfigError("n_components must be >= 1");
}

namespace {

// Column means and sample standard deviations; a zero deviation becomes 1.
void autoscale(const Matrix& M, Vector& mean, Vector& scale) {
    mean = M.colwise().mean();
    const auto n = static_cast<double>(M.rows());
    scale = ((M.rowwise() - mean.transpose()).array().square().colwise().sum() /
             std::max(1.0, n - 1.0))
                .sqrt()
                .transpose();
    for (Eigen::Index j = 0; j < scale.size(); ++j) {
        if (scale[j] <= 1e-12) scale[j] = 1.0;
    }
}

}  // namespace

void PlsDaModel::fit(const Matrix& X, const std::vector<int>& y, int n_classes) {
    const auto N = X.rows();
    const auto F = X.cols();
    const auto K = static_cast<Eigen::Index>(n_classes);
    Matrix Y = Matrix::Zero(N, K);
    for (Eigen::Index i = 0; i < N; ++i) Y(i, y[static_cast<std::size_t>(i)]) = 1.0;

    autoscale(X, x_mean_, x_scale_);
    autoscale(Y, y_mean_, y_scale_);
    Matrix Xk = ((X.rowwise() - x_mean_.transpose()).array().rowwise() / x_scale_.transpose().array()).matrix();
    Matrix Yk = ((Y.rowwise() - y_mean_.transpose()).array().rowwise() / y_scale_.transpose().array()).matrix();

    const auto limit = std::min({static_cast<Eigen::Index>(n_components_), N, F, K});
    Matrix Wm(F, limit), Pm(F, limit), Qm(K, limit);
    Eigen::Index a = 0;
    for (; a < limit; ++a) {
        Eigen::Index start = 0;
        while (start < K && Yk.col(start).cwiseAbs().maxCoeff() <= 1e-12) ++start;
        if (start == K || Xk.cwiseAbs().maxCoeff() <= 1e-12) break;
        Vector u = Yk.col(start);
        Vector w = Vector::Zero(F);
        for (int it = 0; it < 500; ++it) {
            Vector w_new = Xk.transpose() * u;
            const double norm = w_new.norm();
            if (norm <= 1e-300) break;
            w_new /= norm;
            const Vector t = Xk * w_new;
            Vector c = Yk.transpose() * t / t.squaredNorm();
            u = Yk * c / c.squaredNorm();
            const double delta = (w_new - w).squaredNorm();
            w = w_new;
            if (delta < 1e-12 || K == 1) break;
        }
        if (w.squaredNorm() == 0.0) break;
        const Vector t = Xk * w;
        const double tt = t.squaredNorm();
        if (tt <= 1e-300) break;
        const Vector p = Xk.transpose() * t / tt;
        const Vector q = Yk.transpose() * t / tt;
        Xk -= t * p.transpose();
        Yk -= t * q.transpose();
        Wm.col(a) = w;
        Pm.col(a) = p;
        Qm.col(a) = q;
    }
    used_components_ = static_cast<int>(a);
    if (a == 0) {
        coef_ = Matrix::Zero(F, K);
        return;
    }
    const Matrix W = Wm.leftCols(a);
    const Matrix PtW = Pm.leftCols(a).transpose() * W;
    const Matrix R = W * PtW.fullPivLu().solve(Matrix::Identity(a, a));
    coef_ = R * Qm.leftCols(a).transpose();
}

Matrix PlsDaModel::decision_function(const Matrix& X) const {
    const Matrix Xs =
        ((X.rowwise() - x_mean_.transpose()).array().rowwise() / x_scale_.transpose().array()).matrix();
    Matrix Yh = Xs * coef_;
    Yh = (Yh.array().rowwise() * y_scale_.transpose().array()).matrix();
    Yh.rowwise() += y_mean_.transpose();
    return Yh;
}

Matrix PlsDaModel::predict_proba(const Matrix& X) const { return softmax_rows(decision_function(X)); }

void PlsDaModel::save(ByteWriter& out) const {
    out.i64(used_components_);
    out.vec(x_mean_);
    out.vec(x_scale_);
    out.vec(y_mean_);
    out.vec(y_scale_);
    out.mat(coef_);
}

void PlsDaModel::load(ByteReader& in) {
    used_components_ = static_cast<int>(in.i64());
    x_mean_ = in.vec();
    x_scale_ = in.vec();
    y_mean_ = in.vec();
    y_scale_ = in.vec();
    coef_ = in.mat();
}

}  // namespace spectrabench
