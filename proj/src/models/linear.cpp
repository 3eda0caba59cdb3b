#include "spectrabench/models/linear.hpp"

#include "spectrabench/error.hpp"
#include "spectrabench/models/forest.hpp"

#include <algorithm>
#include <cmath>

namespace spectrabench {

namespace {

// log-sum-exp per row, and probabilities.
Matrix scores_of(const Matrix& X, const Matrix& W, const Vector& b) {
    Matrix S = X * W.transpose();
    S.rowwise() += b.transpose();
    return S;
}

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

}  // namespace

double LogisticObjective::value(const Matrix& W, const Vector& b) const {
    const Matrix S = scores_of(X, W, b);
    const auto n = static_cast<double>(X.rows());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
        const double m = S.row(i).maxCoeff();
        const double lse = m + std::log((S.row(i).array() - m).exp().sum());
        loss += sample_weight[static_cast<std::size_t>(i)] * (lse - S(i, y[static_cast<std::size_t>(i)]));
    }
    loss /= n;
    if (l2) loss += W.squaredNorm() / (2.0 * C * n);
    return loss;
}

double LogisticObjective::value_and_gradient(const Matrix& W, const Vector& b, Matrix& gW,
                                             Vector& gb) const {
    const Matrix S = scores_of(X, W, b);
    const auto n = static_cast<double>(X.rows());
    Matrix R = softmax_rows(S);  // becomes w_i (p - y) / n
    double loss = 0.0;
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
        const auto yi = y[static_cast<std::size_t>(i)];
        const double wi = sample_weight[static_cast<std::size_t>(i)];
        const double m = S.row(i).maxCoeff();
        const double lse = m + std::log((S.row(i).array() - m).exp().sum());
        loss += wi * (lse - S(i, yi));
        R(i, yi) -= 1.0;
        R.row(i) *= wi / n;
    }
    loss /= n;
    gW = R.transpose() * X;
    gb = R.colwise().sum().transpose();
    if (l2) {
        loss += W.squaredNorm() / (2.0 * C * n);
        gW += W / (C * n);
    }
    return loss;
}

void LogisticRegressionModel::configure(const ParamMap& params, std::uint64_t) {
    C_ = param_real(params, "C", 1.0);
    if (!(C_ > 0.0)) throw ConfigError("C must be > 0");
    const auto penalty = param_str(params, "penalty", "l2");
    if (penalty != "l1" && penalty != "l2") throw ConfigError("penalty must be l1 or l2");
    l2_ = penalty == "l2";
    max_iter_ = static_cast<int>(param_int(params, "max_iter", 5000));
    if (max_iter_ < 1) throw ConfigError("max_iter must be >= 1");
    class_weight_ = param_str(params, "class_weight", "none");
}

void LogisticRegressionModel::fit(const Matrix& X, const std::vector<int>& y, int n_classes) {
    const auto K = static_cast<Eigen::Index>(n_classes);
    const auto F = X.cols();
    const auto n = static_cast<double>(X.rows());
    const auto weights = class_weights(y, n_classes, class_weight_);
    const LogisticObjective obj{X, y, weights, C_, l2_};
    const double l1_scale = l2_ ? 0.0 : 1.0 / (C_ * n);

    W_ = Matrix::Zero(K, F);
    b_ = Vector::Zero(K);
    Matrix gW;
    Vector gb;
    double step = 1.0;
    converged_ = false;
    iterations_ = 0;

    // Gradient steps with Armijo backtracking. The trial step of each iteration is the
    // Barzilai-Borwein estimate from the previous move.
    Matrix prev_W, prev_gW;
    Vector prev_b, prev_gb;
    for (int it = 0; it < max_iter_; ++it) {
        iterations_ = it + 1;
        const double f = obj.value_and_gradient(W_, b_, gW, gb);
        if (it > 0) {
            const double sy = (W_ - prev_W).cwiseProduct(gW - prev_gW).sum() + (b_ - prev_b).dot(gb - prev_gb);
            const double yy = (gW - prev_gW).squaredNorm() + (gb - prev_gb).squaredNorm();
            step = sy > 0.0 && yy > 0.0 ? std::clamp(sy / yy, 1e-10, 1e10) : std::min(step * 2.0, 1e10);
        }
        prev_W = W_;
        prev_b = b_;
        prev_gW = gW;
        prev_gb = gb;
        if (l2_) {
            const double gnorm = std::max(gW.cwiseAbs().maxCoeff(), gb.cwiseAbs().maxCoeff());
            if (gnorm < 1e-6) {
                converged_ = true;
                break;
            }
            const double g2 = gW.squaredNorm() + gb.squaredNorm();
            for (;;) {
                const Matrix Wn = W_ - step * gW;
                const Vector bn = b_ - step * gb;
                if (obj.value(Wn, bn) <= f - 1e-4 * step * g2 || step < 1e-16) {
                    W_ = Wn;
                    b_ = bn;
                    break;
                }
                step *= 0.5;
            }
        } else {
            // Proximal gradient: smooth part f, non-smooth part l1_scale·||W||₁.
            Matrix Wn;
            Vector bn;
            for (;;) {
                Wn = (W_ - step * gW).unaryExpr([&](double v) { return soft_threshold(v, step * l1_scale); });
                bn = b_ - step * gb;
                const Matrix dW = Wn - W_;
                const Vector db = bn - b_;
                const double bound = f + (gW.cwiseProduct(dW)).sum() + gb.dot(db) +
                                     (dW.squaredNorm() + db.squaredNorm()) / (2.0 * step);
                if (obj.value(Wn, bn) <= bound || step < 1e-16) break;
                step *= 0.5;
            }
            const double mapping = std::max((W_ - Wn).cwiseAbs().maxCoeff(),
                                            (b_ - bn).cwiseAbs().maxCoeff()) / step;
            W_ = Wn;
            b_ = bn;
            if (mapping < 1e-6) {
                converged_ = true;
                break;
            }
        }
    }
}

Matrix LogisticRegressionModel::predict_proba(const Matrix& X) const {
    return softmax_rows(scores_of(X, W_, b_));
}

void LogisticRegressionModel::save(ByteWriter& out) const {
    out.mat(W_);
    out.vec(b_);
    out.i64(iterations_);
    out.boolean(converged_);
}

void LogisticRegressionModel::load(ByteReader& in) {
    W_ = in.mat();
    b_ = in.vec();
    iterations_ = static_cast<int>(in.i64());
    converged_ = in.boolean();
}

void RidgeModel::configure(const ParamMap& params, std::uint64_t) {
    alpha_ = param_real(params, "alpha", 1.0);
    if (!(alpha_ > 0.0)) throw ConfigError("alpha must be > 0");
    solver_ = param_str(params, "solver", "auto");
    if (solver_ != "auto" && solver_ != "cholesky" && solver_ != "svd") {
        throw ConfigError("ridge solver must be auto, cholesky or svd");
    }
    class_weight_ = param_str(params, "class_weight", "none");
}

void RidgeModel::fit(const Matrix& X, const std::vector<int>& y, int n_classes) {
    const auto n = X.rows();
    const auto K = static_cast<Eigen::Index>(n_classes);
    const auto w = class_weights(y, n_classes, class_weight_);
    Vector sw(n);
    for (Eigen::Index i = 0; i < n; ++i) sw[i] = w[static_cast<std::size_t>(i)];

    Matrix Y = Matrix::Constant(n, K, -1.0);
    for (Eigen::Index i = 0; i < n; ++i) Y(i, y[static_cast<std::size_t>(i)]) = 1.0;

    // Weighted centering, then rows scaled by sqrt(weight).
    const double wsum = sw.sum();
    const Vector x_mean = (X.transpose() * sw) / wsum;
    const Vector y_mean = (Y.transpose() * sw) / wsum;
    Matrix Xc = X.rowwise() - x_mean.transpose();
    Matrix Yc = Y.rowwise() - y_mean.transpose();
    const Vector root = sw.cwiseSqrt();
    Xc = root.asDiagonal() * Xc;
    Yc = root.asDiagonal() * Yc;

    if (solver_ == "svd") {
        Eigen::BDCSVD<Matrix> svd(Xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Vector s = svd.singularValues();
        const Vector shrink = s.array() / (s.array().square() + alpha_);
        W_ = svd.matrixV() * shrink.asDiagonal() * svd.matrixU().transpose() * Yc;
    } else if (Xc.cols() <= Xc.rows()) {
        Matrix G = Xc.transpose() * Xc;
        G.diagonal().array() += alpha_;
        W_ = G.ldlt().solve(Xc.transpose() * Yc);
    } else {
        Matrix G = Xc * Xc.transpose();
        G.diagonal().array() += alpha_;
        W_ = Xc.transpose() * G.ldlt().solve(Yc);
    }
    b_ = y_mean - W_.transpose() * x_mean;
}

Matrix RidgeModel::decision_function(const Matrix& X) const {
    Matrix S = X * W_;
    S.rowwise() += b_.transpose();
    return S;
}

Matrix RidgeModel::predict_proba(const Matrix& X) const { return softmax_rows(decision_function(X)); }

void RidgeModel::save(ByteWriter& out) const {
    out.mat(W_);
    out.vec(b_);
}

void RidgeModel::load(ByteReader& in) {
    W_ = in.mat();
    b_ = in.vec();
}

}  // namespace spectrabench
