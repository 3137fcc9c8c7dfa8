#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace hodl::enet {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double default_tolerance = 1e-8;
inline constexpr int default_max_sweeps = 10000;
inline constexpr int default_grid_size = 100;
inline constexpr double default_grid_ratio = 1e-3;

struct Options
{
    double tolerance = default_tolerance;
    int max_sweeps = default_max_sweeps;
};

template <class Scalar>
struct EnetFit
{
    Matrix<Scalar> B;
    Scalar alpha = 0;
    Scalar objective = 0;
    int sweeps = 0;
    bool converged = false;
};

/// Sufficient statistics X'X/T, X'Y/T and tr(Y'Y)/T.
template <class Scalar>
struct Gram
{
    Matrix<Scalar> xx;
    Matrix<Scalar> xy;
    Scalar yy = 0;
    Eigen::Index rows = 0;

    Eigen::Index predictors() const { return xx.rows(); }
    Eigen::Index tasks() const { return xy.cols(); }
};

template <class DX, class DY>
Gram<typename DX::Scalar> gram(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& Y)
{
    using Scalar = typename DX::Scalar;
    if (X.rows() != Y.rows()) throw std::invalid_argument("enet: X and Y row counts differ");
    if (X.rows() == 0) throw std::invalid_argument("enet: empty design");
    if (!X.allFinite() || !Y.allFinite()) throw std::invalid_argument("enet: non-finite input");
    Gram<Scalar> g;
    const Scalar T = Scalar(X.rows());
    g.rows = X.rows();
    g.xx = (X.transpose() * X) / T;
    g.xy = (X.transpose() * Y) / T;
    g.yy = Y.squaredNorm() / T;
    return g;
}

/// Smallest alpha with an all-zero solution: 2 max_j ||x_j'Y|| / T.
template <class Scalar>
Scalar alpha_max(const Gram<Scalar>& g)
{
    return g.xy.rows() == 0 ? Scalar(0) : Scalar(2) * g.xy.rowwise().norm().maxCoeff();
}

template <class DX, class DY>
typename DX::Scalar alpha_max(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& Y)
{
    return alpha_max(gram(X, Y));
}

/// `count` log-spaced values from a_max down to ratio * a_max.
template <class Scalar>
std::vector<Scalar> alpha_grid(Scalar a_max, int count = default_grid_size, Scalar ratio = Scalar(default_grid_ratio))
{
    if (count < 1) throw std::invalid_argument("alpha_grid: count must be positive");
    std::vector<Scalar> grid(static_cast<std::size_t>(count));
    if (count == 1) {
        grid[0] = a_max;
        return grid;
    }
    const Scalar lo = std::log(ratio);
    for (int i = 0; i < count; ++i) grid[std::size_t(i)] = a_max * std::exp(lo * Scalar(i) / Scalar(count - 1));
    return grid;
}

template <class Scalar>
Scalar penalty(const Matrix<Scalar>& B, Scalar alpha)
{
    return alpha * (B.squaredNorm() / Scalar(4) + B.rowwise().norm().sum() / Scalar(2));
}

/// (1/2T)||Y - XB||_F^2 + alpha (||B||_F^2 / 4 + sum_j ||B_j.|| / 2)
template <class DX, class DY, class DB>
typename DX::Scalar objective(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& Y,
                              const Eigen::MatrixBase<DB>& B, typename DX::Scalar alpha)
{
    using Scalar = typename DX::Scalar;
    const Matrix<Scalar> b = B;
    return (Y - X * b).squaredNorm() / (Scalar(2) * Scalar(X.rows())) + penalty(b, alpha);
}

template <class Scalar>
Scalar objective(const Gram<Scalar>& g, const Matrix<Scalar>& B, Scalar alpha)
{
    const Scalar fit = g.yy - Scalar(2) * (B.transpose() * g.xy).trace() + (B.transpose() * g.xx * B).trace();
    return std::max(Scalar(0), fit) / Scalar(2) + penalty(B, alpha);
}

/// Largest violation of the optimality conditions. Zero rows need
/// ||g_j|| <= alpha/2 with g_j = x_j'(Y - XB)/T - (alpha/2) B_j; nonzero rows
/// need g_j = (alpha/2) B_j / ||B_j||.
template <class Scalar>
Scalar kkt_residual(const Gram<Scalar>& g, const Matrix<Scalar>& B, Scalar alpha)
{
    const Matrix<Scalar> grad = g.xy - g.xx * B - (alpha / Scalar(2)) * B;
    Scalar worst = 0;
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
        const Scalar nb = B.row(j).norm();
        if (nb == Scalar(0)) {
            worst = std::max(worst, grad.row(j).norm() - alpha / Scalar(2));
        } else {
            worst = std::max(worst, (grad.row(j) - (alpha / Scalar(2)) * B.row(j) / nb).norm());
        }
    }
    return worst;
}

template <class DX, class DY, class DB>
typename DX::Scalar kkt_residual(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& Y,
                                 const Eigen::MatrixBase<DB>& B, typename DX::Scalar alpha)
{
    using Scalar = typename DX::Scalar;
    return kkt_residual(gram(X, Y), Matrix<Scalar>(B), alpha);
}

/// Newton iterations on the stationarity equations of the nonzero rows, with
/// the zero rows held at zero. A step is kept only if it lowers the
/// objective and leaves every active row nonzero. Returns true if B moved.
template <class Scalar>
bool newton_polish(const Gram<Scalar>& g, Scalar alpha, Matrix<Scalar>& B, int max_iter = 20)
{
    const Eigen::Index m = B.cols();
    std::vector<Eigen::Index> act;
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
        if (B.row(j).squaredNorm() > Scalar(0)) act.push_back(j);
    }
    const auto na = Eigen::Index(act.size());
    if (na == 0) return false;
    const Scalar half = alpha / Scalar(2);
    const Eigen::Index n = na * m;
    Matrix<Scalar> J(n, n);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> F(n), step(n);
    Scalar current = objective(g, B, alpha);
    bool moved = false;
    for (int it = 0; it < max_iter; ++it) {
        const Matrix<Scalar> grad = g.xx * B - g.xy;
        J.setZero();
        for (Eigen::Index a = 0; a < na; ++a) {
            const auto ja = act[std::size_t(a)];
            const Scalar nb = B.row(ja).norm();
            for (Eigen::Index k = 0; k < m; ++k) {
                F(a * m + k) = grad(ja, k) + half * B(ja, k) + half * B(ja, k) / nb;
                for (Eigen::Index b = 0; b < na; ++b) J(a * m + k, b * m + k) = g.xx(ja, act[std::size_t(b)]);
                J(a * m + k, a * m + k) += half;
                for (Eigen::Index l = 0; l < m; ++l) {
                    J(a * m + k, a * m + l) +=
                        half * ((k == l ? Scalar(1) : Scalar(0)) / nb - B(ja, k) * B(ja, l) / (nb * nb * nb));
                }
            }
        }
        if (F.cwiseAbs().maxCoeff() < Scalar(1e-15)) break;
        const Eigen::LLT<Matrix<Scalar>> llt(J);
        if (llt.info() != Eigen::Success) break;
        step = llt.solve(F);
        Scalar t = 1;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls, t /= Scalar(2)) {
            Matrix<Scalar> trial = B;
            bool nonzero = true;
            for (Eigen::Index a = 0; a < na; ++a) {
                const auto ja = act[std::size_t(a)];
                for (Eigen::Index k = 0; k < m; ++k) trial(ja, k) -= t * step(a * m + k);
                nonzero = nonzero && trial.row(ja).squaredNorm() > Scalar(0);
            }
            if (!nonzero) continue;
            const Scalar value = objective(g, trial, alpha);
            if (value <= current) {
                const bool changed = (trial - B).cwiseAbs().maxCoeff() > Scalar(0);
                B = std::move(trial);
                current = value;
                accepted = changed;
                break;
            }
        }
        if (!accepted) break;
        moved = true;
    }
    return moved;
}

/// Block coordinate descent with group soft-thresholding on the Gram form.
/// `warm` (p x m) seeds the iterate when given. alpha = 0 returns the
/// minimum-norm least-squares solution.
template <class Scalar>
EnetFit<Scalar> fit(const Gram<Scalar>& g, Scalar alpha, const Matrix<Scalar>* warm = nullptr,
                    const Options& opt = {})
{
    if (!(alpha >= Scalar(0)) || !std::isfinite(double(alpha))) throw std::invalid_argument("enet: alpha must be >= 0");
    const Eigen::Index p = g.predictors();
    const Eigen::Index m = g.tasks();
    EnetFit<Scalar> out;
    out.alpha = alpha;
    if (alpha == Scalar(0)) {
        Eigen::CompleteOrthogonalDecomposition<Matrix<Scalar>> cod(g.xx);
        out.B = cod.solve(g.xy);
        out.converged = true;
        out.objective = objective(g, out.B, alpha);
        return out;
    }
    out.B = warm ? *warm : Matrix<Scalar>::Zero(p, m);
    if (out.B.rows() != p || out.B.cols() != m) throw std::invalid_argument("enet: warm start has wrong shape");
    // r = X'(Y - XB)/T, kept current after each block update.
    Matrix<Scalar> r = g.xy - g.xx * out.B;
    const Scalar half = alpha / Scalar(2);
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> z(m), next(m), delta(m);
    auto update = [&](Eigen::Index j) {
        const Scalar d = g.xx(j, j);
        z = r.row(j) + d * out.B.row(j);
        const Scalar nz = z.norm();
        if (nz <= half) {
            next.setZero();
        } else {
            next = z * ((Scalar(1) - half / nz) / (d + half));
        }
        delta = next - out.B.row(j);
        const Scalar step = delta.cwiseAbs().maxCoeff();
        if (step != Scalar(0)) {
            r.noalias() -= g.xx.col(j) * delta;
            out.B.row(j) = next;
        }
        return step;
    };
    // Full sweeps alternate with sweeps over the nonzero rows and, on slow
    // problems, a Newton polish of the nonzero rows; only a full sweep can
    // declare convergence.
    std::vector<Eigen::Index> active;
    constexpr int inner_sweeps = 25;
    while (out.sweeps < opt.max_sweeps) {
        Scalar max_update = 0;
        for (Eigen::Index j = 0; j < p; ++j) max_update = std::max(max_update, update(j));
        ++out.sweeps;
        if (max_update < Scalar(opt.tolerance)) {
            out.converged = true;
            break;
        }
        active.clear();
        for (Eigen::Index j = 0; j < p; ++j) {
            if (out.B.row(j).squaredNorm() > Scalar(0)) active.push_back(j);
        }
        bool settled = false;
        for (int s = 0; s < inner_sweeps && out.sweeps < opt.max_sweeps; ++s) {
            Scalar inner = 0;
            for (auto j : active) inner = std::max(inner, update(j));
            ++out.sweeps;
            if (inner < Scalar(opt.tolerance)) {
                settled = true;
                break;
            }
        }
        if (!settled && newton_polish(g, alpha, out.B)) r = g.xy - g.xx * out.B;
    }
    out.objective = objective(g, out.B, alpha);
    return out;
}

/// Fits directly from data; the objective is evaluated on the residuals.
template <class DX, class DY>
EnetFit<typename DX::Scalar> fit_multitask_enet(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& Y,
                                                typename DX::Scalar alpha, const Options& opt = {})
{
    using Scalar = typename DX::Scalar;
    const auto g = gram(X, Y);
    EnetFit<Scalar> out;
    if (alpha == Scalar(0)) {
        out.alpha = 0;
        out.B = Eigen::CompleteOrthogonalDecomposition<Matrix<Scalar>>(Matrix<Scalar>(X)).solve(Matrix<Scalar>(Y));
        out.converged = true;
    } else {
        out = fit(g, alpha, static_cast<const Matrix<Scalar>*>(nullptr), opt);
    }
    out.objective = objective(X, Y, out.B, alpha);
    return out;
}

/// Rows with ||B_j.|| above the selection threshold.
template <class Scalar>
std::vector<bool> active_rows(const Matrix<Scalar>& B, Scalar threshold = Scalar(1e-12))
{
    std::vector<bool> out(std::size_t(B.rows()));
    for (Eigen::Index j = 0; j < B.rows(); ++j) out[std::size_t(j)] = B.row(j).norm() > threshold;
    return out;
}

} // namespace hodl::enet
