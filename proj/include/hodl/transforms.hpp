#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace hodl::features {

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Transformed series whose element i corresponds to input index offset + i.
/// Leading inputs without enough history produce no output.
template <class Scalar>
struct OffsetSeries
{
    Eigen::Index offset = 0;
    Vector<Scalar> values;

    bool empty() const { return values.size() == 0; }
    Eigen::Index size() const { return values.size(); }
};

inline constexpr double frac_diff_order = 0.5;
inline constexpr int frac_diff_max_lag = 200;
inline constexpr double frac_diff_weight_floor = 1e-10;
inline constexpr int detrend_window = 52;
inline constexpr double zscore_floor = 1e-2;

/// w_0 = 1, w_k = w_{k-1} * (-(d - (k-1)) / k) for k <= max_lag; the
/// recurrence stops at the first weight with |w_k| < floor, which is dropped.
template <class Scalar>
Vector<Scalar> frac_diff_weights(Scalar d, int max_lag, Scalar floor = Scalar(frac_diff_weight_floor))
{
    std::vector<Scalar> w{Scalar(1)};
    for (int k = 1; k <= max_lag; ++k) {
        const Scalar next = w.back() * (-(d - Scalar(k - 1)) / Scalar(k));
        if (std::abs(next) < floor) break;
        w.push_back(next);
    }
    return Eigen::Map<const Vector<Scalar>>(w.data(), Eigen::Index(w.size()));
}

/// y_t = sum_k w_k x_{t-k} over the lags available at t (at most max_lag).
/// Output starts at t = 1, the first index with a lag.
template <class Derived>
OffsetSeries<typename Derived::Scalar> frac_diff(const Eigen::MatrixBase<Derived>& x,
                                                 typename Derived::Scalar d = frac_diff_order,
                                                 int max_lag = frac_diff_max_lag)
{
    using Scalar = typename Derived::Scalar;
    OffsetSeries<Scalar> out;
    out.offset = 1;
    const Eigen::Index n = x.size();
    if (n < 2) return out;
    const Vector<Scalar> w = frac_diff_weights<Scalar>(d, max_lag);
    out.values.resize(n - 1);
    for (Eigen::Index t = 1; t < n; ++t) {
        const Eigen::Index lags = std::min<Eigen::Index>(t, w.size() - 1);
        Scalar acc(0);
        for (Eigen::Index k = 0; k <= lags; ++k) acc += w(k) * x(t - k);
        out.values(t - 1) = acc;
    }
    return out;
}

/// y_t = x_t - x_{t-1}; empty for fewer than two inputs.
template <class Derived>
OffsetSeries<typename Derived::Scalar> first_diff(const Eigen::MatrixBase<Derived>& x)
{
    using Scalar = typename Derived::Scalar;
    OffsetSeries<Scalar> out;
    out.offset = 1;
    const Eigen::Index n = x.size();
    if (n < 2) return out;
    out.values = x.tail(n - 1) - x.head(n - 1);
    return out;
}

/// Residual at the end of a trailing OLS line fitted on the last `window`
/// points. Series shorter than the window fall back to first differences.
template <class Derived>
OffsetSeries<typename Derived::Scalar> rolling_detrend(const Eigen::MatrixBase<Derived>& x,
                                                       int window = detrend_window)
{
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = x.size();
    if (window < 2) throw std::invalid_argument("rolling_detrend: window must be >= 2");
    if (n < window) return first_diff(x);
    OffsetSeries<Scalar> out;
    out.offset = window - 1;
    out.values.resize(n - window + 1);
    const Scalar jbar = Scalar(window - 1) / Scalar(2);
    Scalar sjj(0);
    for (int j = 0; j < window; ++j) sjj += (Scalar(j) - jbar) * (Scalar(j) - jbar);
    for (Eigen::Index t = window - 1; t < n; ++t) {
        const auto seg = x.segment(t - window + 1, window);
        const Scalar xbar = seg.mean();
        Scalar sjx(0);
        for (int j = 0; j < window; ++j) sjx += (Scalar(j) - jbar) * (seg(j) - xbar);
        const Scalar slope = sjx / sjj;
        const Scalar fitted = xbar + slope * (Scalar(window - 1) - jbar);
        out.values(t - window + 1) = x(t) - fitted;
    }
    return out;
}

/// EMA with alpha = 2 / (w + 1), seeded with the mean of the first w values
/// at index w - 1. Empty for fewer than w inputs.
template <class Derived>
OffsetSeries<typename Derived::Scalar> ema(const Eigen::MatrixBase<Derived>& x, int w)
{
    using Scalar = typename Derived::Scalar;
    if (w < 1) throw std::invalid_argument("ema: window must be >= 1");
    OffsetSeries<Scalar> out;
    out.offset = w - 1;
    const Eigen::Index n = x.size();
    if (n < w) return out;
    const Scalar a = Scalar(2) / Scalar(w + 1);
    out.values.resize(n - w + 1);
    Scalar level = x.head(w).mean();
    out.values(0) = level;
    for (Eigen::Index t = w; t < n; ++t) {
        level = a * x(t) + (Scalar(1) - a) * level;
        out.values(t - w + 1) = level;
    }
    return out;
}

/// (w-1)-divisor standard deviation over the trailing w values.
template <class Derived>
OffsetSeries<typename Derived::Scalar> rolling_vol(const Eigen::MatrixBase<Derived>& x, int w)
{
    using Scalar = typename Derived::Scalar;
    if (w < 2) throw std::invalid_argument("rolling_vol: window must be >= 2");
    OffsetSeries<Scalar> out;
    out.offset = w - 1;
    const Eigen::Index n = x.size();
    if (n < w) return out;
    out.values.resize(n - w + 1);
    for (Eigen::Index t = w - 1; t < n; ++t) {
        const auto seg = x.segment(t - w + 1, w);
        const Scalar m = seg.mean();
        out.values(t - w + 1) = std::sqrt((seg.array() - m).square().sum() / Scalar(w - 1));
    }
    return out;
}

/// Expanding-window z-score with population variance; the scale is floored
/// at eps, so the first observation maps to 0.
template <class Derived>
Vector<typename Derived::Scalar> causal_zscore(const Eigen::MatrixBase<Derived>& x,
                                               typename Derived::Scalar eps = zscore_floor)
{
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = x.size();
    Vector<Scalar> z(n);
    Scalar mean(0), m2(0);
    for (Eigen::Index t = 0; t < n; ++t) {
        const Scalar delta = x(t) - mean;
        mean += delta / Scalar(t + 1);
        m2 += delta * (x(t) - mean);
        const Scalar sd = std::sqrt(std::max(Scalar(0), m2 / Scalar(t + 1)));
        z(t) = (x(t) - mean) / std::max(sd, eps);
    }
    return z;
}

/// Column-wise causal_zscore.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
causal_zscore_columns(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar eps = zscore_floor)
{
    Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> z(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) z.col(c) = causal_zscore(x.col(c), eps);
    return z;
}

/// Clipped population standard deviation of the first `count` values.
template <class Derived>
typename Derived::Scalar expanding_scale(const Eigen::MatrixBase<Derived>& x, Eigen::Index count,
                                         typename Derived::Scalar eps = zscore_floor)
{
    using Scalar = typename Derived::Scalar;
    if (count < 1 || count > x.size()) throw std::out_of_range("expanding_scale: count outside series");
    const auto head = x.head(count);
    const Scalar m = head.mean();
    const Scalar sd = std::sqrt((head.array() - m).square().sum() / Scalar(count));
    return std::max(sd, eps);
}

} // namespace hodl::features
