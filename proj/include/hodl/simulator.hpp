#pragma once

#include <hodl/calendar.hpp>
#include <hodl/panel.hpp>
#include <hodl/rng.hpp>
#include <hodl/series.hpp>

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hodl::sim {

/// Inclusive holding-period bounds in days.
struct HorizonInterval
{
    int lower = 1;
    int upper = 30;

    std::string label() const;
    /// Parses "731-1095".
    static HorizonInterval parse(std::string_view text);
    void validate() const;

    friend bool operator==(const HorizonInterval&, const HorizonInterval&) = default;
};

inline constexpr std::array<HorizonInterval, 6> canonical_intervals{{
    {1, 30}, {31, 90}, {91, 180}, {181, 365}, {366, 730}, {731, 1095}}};

/// High/low prices of a basket's coins on a shared calendar (T days x C
/// coins, NaN where a coin has no quote).
struct PriceCube
{
    std::string basket;
    std::vector<std::string> symbols;
    Date start{};
    Eigen::MatrixXd high;
    Eigen::MatrixXd low;

    Eigen::Index days() const { return high.rows(); }
    Eigen::Index coins() const { return high.cols(); }
};

/// Spans the union of the members' calendars; members keep their index
/// order as coin ids 0..C-1.
PriceCube build_price_cube(std::string basket, const std::vector<const panel::TokenPanel*>& members);

/// Cumulative log risk-free return gamma_t over a calendar.
struct RiskFreeCurve
{
    Date start{};
    std::vector<double> gamma;

    /// exp(gamma_e - gamma_s) - 1
    double holding_return(std::size_t buy_day, std::size_t sell_day) const;
};

/// Daily simple rate y / (100 * 365) from annualized percent yields, carried
/// forward over unquoted days and back-filled before the first quote.
RiskFreeCurve build_risk_free_curve(Date start, std::size_t days, const DailySeries& annual_percent);

RiskFreeCurve constant_rate_curve(Date start, std::size_t days, double daily_rate);

struct SimConfig
{
    std::string basket = "ALL";
    HorizonInterval interval{};
    std::size_t n = 1000;
    double fee = 0.001;
    std::uint64_t seed = 42;
    int max_consecutive_failures = 50;
    /// 0 = hardware concurrency. Never changes the output.
    unsigned workers = 0;

    void validate() const;
};

struct EpisodeSkeleton
{
    std::uint32_t coin = 0;
    std::uint32_t buy_day = 0;
    std::uint32_t sell_day = 0;
    std::uint32_t holding_days = 0;
};

struct Episode
{
    EpisodeSkeleton at;
    double p_buy = 0;
    double p_sell = 0;
    double net_return = 0;
    double rf_return = 0;
    double excess_return = 0;
};

enum class AttemptStatus : std::uint8_t
{
    accepted,
    discarded, ///< the horizon does not fit in the sample
    rejected,  ///< a drawn price point failed the validity filter
};

struct Attempt
{
    AttemptStatus status = AttemptStatus::discarded;
    EpisodeSkeleton skeleton;
};

int draw_horizon(const HorizonInterval& interval, CounterRng& rng);

/// (s, e) with s uniform on {0..T-tau-1} and e = s + tau; nullopt when the
/// horizon does not fit.
std::optional<std::pair<std::uint32_t, std::uint32_t>> draw_dates(std::size_t days, int tau,
                                                                  CounterRng& rng);

/// H >= L > 0 on day t for coin c; missing quotes fail.
bool valid_price_point(const PriceCube& cube, Eigen::Index day, Eigen::Index coin);

Attempt sample_valid_episode(const PriceCube& cube, const HorizonInterval& interval, CounterRng& rng);

/// (1 - fee) * (sell / buy) * (1 - fee) - 1
/// (1 - fee)^2 P_sell / P_buy - 1, evaluated as (P_sell - P_buy) / P_buy + fee (fee - 2) P_sell / P_buy
/// so that small returns do not lose digits to cancellation.
inline double net_return(double p_buy, double p_sell, double fee)
{
    return std::fma(std::fma(fee, fee, -2.0 * fee), p_sell / p_buy, (p_sell - p_buy) / p_buy);
}

Episode price_and_return(const EpisodeSkeleton& skeleton, const PriceCube& cube,
                         const RiskFreeCurve& curve, double fee, CounterRng& rng);

/// Columnar episode store.
struct EpisodeBatch
{
    std::string basket;
    HorizonInterval interval{};
    Date calendar_start{};
    std::vector<std::string> symbols;

    std::vector<std::uint32_t> coin;
    std::vector<std::uint32_t> buy_day;
    std::vector<std::uint32_t> sell_day;
    std::vector<std::uint32_t> holding_days;
    std::vector<double> p_buy;
    std::vector<double> p_sell;
    std::vector<double> net_return;
    std::vector<double> rf_return;
    std::vector<double> excess_return;

    bool complete = false;
    std::uint64_t attempts = 0;
    std::uint64_t discarded = 0;
    std::uint64_t rejected = 0;

    std::size_t size() const { return excess_return.size(); }
    void reserve(std::size_t n);
    void push_back(const Episode& e);
    Episode episode(std::size_t i) const;
    Date sell_date(std::size_t i) const { return calendar_start + std::chrono::days{sell_day[i]}; }
};

/// Stream id of one sampling attempt; attempt k of a run always draws from
/// the same stream, whatever the worker count.
CounterRng attempt_stream(const SimConfig& config, std::uint64_t ordinal);

/// Samples until `n` valid episodes are collected or `max_consecutive_failures`
/// attempts in a row fail (discards and rejections both count). Attempts are
/// evaluated in parallel and then scanned in ordinal order, so the result is
/// bit-identical for any worker count.
EpisodeBatch simulate_batch(const SimConfig& config, const PriceCube& cube, const RiskFreeCurve& curve);

} // namespace hodl::sim
