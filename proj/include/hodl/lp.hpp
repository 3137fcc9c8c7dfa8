#pragma once

#include <hodl/rng.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace hodl::lp {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double ridge_fallback = 1e-8;
inline constexpr double se_floor = 1e-8;

/// Coefficients and HC1 standard errors, one column per response. Row 0 is
/// the intercept, row 1 + j the j-th regressor.
template <class Scalar>
struct OlsFit
{
    Matrix<Scalar> coef;
    Matrix<Scalar> se;
    bool ridge = false;
};

/// OLS with intercept of every column of Y on Z, sharing one factorization.
/// Rank-deficient designs get a 1e-8 ridge on Z'Z and are flagged.
template <class DZ, class DY>
OlsFit<typename DZ::Scalar> ols_hc1(const Eigen::MatrixBase<DZ>& Z, const Eigen::MatrixBase<DY>& Y)
{
    using Scalar = typename DZ::Scalar;
    const Eigen::Index n = Z.rows();
    const Eigen::Index k = Z.cols() + 1;
    if (Y.rows() != n) throw std::invalid_argument("ols_hc1: row mismatch");
    if (n <= k) throw std::invalid_argument("ols_hc1: need more observations than coefficients");
    Matrix<Scalar> D(n, k);
    D.col(0).setOnes();
    D.rightCols(k - 1) = Z;

    OlsFit<Scalar> out;
    Matrix<Scalar> A = D.transpose() * D;
    if (Eigen::ColPivHouseholderQR<Matrix<Scalar>>(D).rank() < k) {
        A.diagonal().array() += Scalar(ridge_fallback);
        out.ridge = true;
    }
    const Eigen::LDLT<Matrix<Scalar>> ldlt(A);
    const Matrix<Scalar> Ainv = ldlt.solve(Matrix<Scalar>::Identity(k, k));
    out.coef = Ainv * (D.transpose() * Y);
    const Matrix<Scalar> E = Y - D * out.coef;
    out.se.resize(k, Y.cols());
    const Scalar dof = Scalar(n) / Scalar(n - k);
    for (Eigen::Index c = 0; c < Y.cols(); ++c) {
        const Matrix<Scalar> DE = D.array().colwise() * E.col(c).array();
        const Matrix<Scalar> meat = DE.transpose() * DE;
        const Matrix<Scalar> cov = dof * Ainv * meat * Ainv;
        out.se.col(c) = cov.diagonal().cwiseMax(Scalar(0)).cwiseSqrt();
    }
    return out;
}

template <class Scalar>
struct Smoothed
{
    Vector<Scalar> b;
    Vector<Scalar> se;
};

/// Minimizes sum_j (b_j - beta_j)^2 / s_j^2 + lambda sum_j (b_{j+1} - b_j)^2 / delta_j
/// with standard errors from diag(G diag(s^2) G'), b = G beta. Standard errors
/// are floored at 1e-8 before weighting.
///
/// Solved in increments z = Db: b = b0 + cumsum(z), where b0 is the weighted
/// mean of beta - cumsum(z) and (S'MS + lambda Lambda) z = S'M beta with
/// M = W - w w' / sum(w).
template <class Scalar>
Smoothed<Scalar> rw1_smooth(const Vector<Scalar>& beta, const Vector<Scalar>& se, const Vector<Scalar>& delta,
                            Scalar lambda)
{
    const Eigen::Index H = beta.size();
    if (se.size() != H || (H > 0 && delta.size() != H - 1)) throw std::invalid_argument("rw1_smooth: size mismatch");
    if (lambda < Scalar(0)) throw std::invalid_argument("rw1_smooth: lambda must be >= 0");
    if ((delta.array() <= Scalar(0)).any()) throw std::invalid_argument("rw1_smooth: spacings must be positive");
    Smoothed<Scalar> out;
    if (H == 0) return out;
    const Vector<Scalar> w = se.cwiseMax(Scalar(se_floor)).array().square().inverse();
    const Vector<Scalar> mean_weights = w / w.sum();

    Matrix<Scalar> G = Vector<Scalar>::Ones(H) * mean_weights.transpose();
    if (H > 1) {
        Matrix<Scalar> S = Matrix<Scalar>::Zero(H, H - 1);
        for (Eigen::Index j = 1; j < H; ++j) S.block(j, 0, 1, j).setOnes();
        const Matrix<Scalar> M = Matrix<Scalar>(w.asDiagonal()) - w * mean_weights.transpose();
        Matrix<Scalar> K = S.transpose() * M * S;
        K.diagonal() += lambda * delta.cwiseInverse();
        const Matrix<Scalar> Z = Eigen::LDLT<Matrix<Scalar>>(K).solve(S.transpose() * M);
        const Matrix<Scalar> Q = Matrix<Scalar>::Identity(H, H) - G;
        G += Q * S * Z;
    }
    out.b = G * beta;
    out.se = (G.array().square().rowwise() * w.transpose().array().inverse()).rowwise().sum().sqrt();
    return out;
}

/// Weekly positions ceil(h/7) and their spacings.
inline std::vector<double> horizon_spacings(std::span<const int> horizons_days)
{
    std::vector<double> out;
    for (std::size_t j = 1; j < horizons_days.size(); ++j) {
        out.push_back(double((horizons_days[j] + 6) / 7 - (horizons_days[j - 1] + 6) / 7));
    }
    return out;
}

/// max(2, min(T - 1, max(1.75 T^(1/3), median of ceil(h/7))))
inline double mean_block_length(std::ptrdiff_t T, std::span<const int> horizons_days)
{
    std::vector<double> weeks;
    for (int h : horizons_days) weeks.push_back(double((h + 6) / 7));
    std::sort(weeks.begin(), weeks.end());
    double median = 0;
    if (!weeks.empty()) {
        const auto n = weeks.size();
        median = n % 2 ? weeks[n / 2] : (weeks[n / 2 - 1] + weeks[n / 2]) / 2;
    }
    const double rule = 1.75 * std::cbrt(double(T));
    return std::max(2.0, std::min(double(T - 1), std::max(rule, median)));
}

/// Stationary bootstrap: uniform start, continue (wrapping) with probability
/// 1 - 1/L, restart uniformly with probability 1/L.
inline std::vector<Eigen::Index> stationary_bootstrap_indices(Eigen::Index T, double mean_length, CounterRng& rng)
{
    if (T < 1) throw std::invalid_argument("stationary bootstrap: empty sample");
    if (!(mean_length >= 1)) throw std::invalid_argument("stationary bootstrap: mean block length must be >= 1");
    const double restart = 1.0 / mean_length;
    std::vector<Eigen::Index> out(static_cast<std::size_t>(T));
    const auto last = std::uint64_t(T - 1);
    out[0] = Eigen::Index(rng.uniform_int(0, last));
    for (std::size_t t = 1; t < out.size(); ++t) {
        if (rng.uniform01() < restart) {
            out[t] = Eigen::Index(rng.uniform_int(0, last));
        } else {
            out[t] = (out[t - 1] + 1) % T;
        }
    }
    return out;
}

/// k-th largest absolute value (k = 1 is the maximum).
template <class Scalar>
Scalar kth_largest_abs(std::vector<Scalar> values, int k)
{
    if (k < 1 || std::size_t(k) > values.size()) throw std::invalid_argument("kth_largest_abs: k out of range");
    for (auto& v : values) v = std::abs(v);
    std::nth_element(values.begin(), values.begin() + (k - 1), values.end(), std::greater<>());
    return values[std::size_t(k - 1)];
}

inline int k_max(int horizons) { return std::min(2, horizons); }

} // namespace hodl::lp
