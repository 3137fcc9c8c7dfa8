#include <hodl/simulator.hpp>

#include <hodl/parallel.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hodl::sim {

std::string HorizonInterval::label() const
{
    return std::to_string(lower) + "-" + std::to_string(upper);
}

HorizonInterval HorizonInterval::parse(std::string_view text)
{
    const auto dash = text.find('-');
    HorizonInterval out{0, 0};
    auto parse_int = [](std::string_view s, int& v) {
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        return ec == std::errc{} && p == s.data() + s.size();
    };
    if (dash == std::string_view::npos || !parse_int(text.substr(0, dash), out.lower) ||
        !parse_int(text.substr(dash + 1), out.upper)) {
        throw std::invalid_argument("interval must look like LOWER-UPPER, got '" + std::string(text) + "'");
    }
    out.validate();
    return out;
}

void HorizonInterval::validate() const
{
    if (lower < 1 || lower > upper) {
        throw std::invalid_argument("interval requires 1 <= lower <= upper, got " + label());
    }
}

PriceCube build_price_cube(std::string basket, const std::vector<const panel::TokenPanel*>& members)
{
    PriceCube cube;
    cube.basket = std::move(basket);
    if (members.empty()) return cube;
    Date first = Date::max();
    Date last = Date::min();
    for (const auto* p : members) {
        if (p->empty()) continue;
        first = std::min(first, p->dates.front());
        last = std::max(last, p->dates.back());
    }
    if (first > last) return cube;
    const auto days = static_cast<Eigen::Index>(days_between(first, last) + 1);
    const auto coins = static_cast<Eigen::Index>(members.size());
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    cube.start = first;
    cube.high = Eigen::MatrixXd::Constant(days, coins, nan);
    cube.low = Eigen::MatrixXd::Constant(days, coins, nan);
    for (Eigen::Index c = 0; c < coins; ++c) {
        const auto& p = *members[static_cast<std::size_t>(c)];
        cube.symbols.push_back(p.symbol);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const auto t = days_between(first, p.dates[i]);
            cube.high(t, c) = p.high[i];
            cube.low(t, c) = p.low[i];
        }
    }
    return cube;
}

double RiskFreeCurve::holding_return(std::size_t buy_day, std::size_t sell_day) const
{
    return std::exp(gamma[sell_day] - gamma[buy_day]) - 1.0;
}

RiskFreeCurve build_risk_free_curve(Date start, std::size_t days, const DailySeries& annual_percent)
{
    std::vector<std::pair<Date, double>> quotes;
    for (std::size_t i = 0; i < annual_percent.dates.size(); ++i) {
        if (std::isfinite(annual_percent.values[i])) {
            quotes.emplace_back(annual_percent.dates[i], annual_percent.values[i]);
        }
    }
    std::sort(quotes.begin(), quotes.end());
    RiskFreeCurve curve;
    curve.start = start;
    curve.gamma.resize(days);
    std::size_t q = 0;
    double yield = quotes.empty() ? 0.0 : quotes.front().second;
    double acc = 0.0;
    for (std::size_t t = 0; t < days; ++t) {
        const Date d = start + std::chrono::days{t};
        while (q < quotes.size() && quotes[q].first <= d) yield = quotes[q++].second;
        acc += std::log1p(yield / (100.0 * 365.0));
        curve.gamma[t] = acc;
    }
    return curve;
}

RiskFreeCurve constant_rate_curve(Date start, std::size_t days, double daily_rate)
{
    RiskFreeCurve curve;
    curve.start = start;
    curve.gamma.resize(days);
    const double step = std::log1p(daily_rate);
    for (std::size_t t = 0; t < days; ++t) curve.gamma[t] = step * double(t + 1);
    return curve;
}

void SimConfig::validate() const
{
    interval.validate();
    if (n < 1) throw std::invalid_argument("simulation needs n >= 1");
    if (!(fee >= 0.0 && fee < 1.0)) throw std::invalid_argument("fee must lie in [0, 1)");
    if (max_consecutive_failures < 1) throw std::invalid_argument("max_consecutive_failures must be >= 1");
}

int draw_horizon(const HorizonInterval& interval, CounterRng& rng)
{
    return static_cast<int>(rng.uniform_int(std::uint64_t(interval.lower), std::uint64_t(interval.upper)));
}

std::optional<std::pair<std::uint32_t, std::uint32_t>> draw_dates(std::size_t days, int tau, CounterRng& rng)
{
    const auto latest_buy = static_cast<long long>(days) - tau - 1;
    if (latest_buy < 0) return std::nullopt;
    const auto s = static_cast<std::uint32_t>(rng.uniform_int(0, std::uint64_t(latest_buy)));
    return std::pair{s, s + static_cast<std::uint32_t>(tau)};
}

bool valid_price_point(const PriceCube& cube, Eigen::Index day, Eigen::Index coin)
{
    const double h = cube.high(day, coin);
    const double l = cube.low(day, coin);
    return h >= l && l > 0.0;
}

Attempt sample_valid_episode(const PriceCube& cube, const HorizonInterval& interval, CounterRng& rng)
{
    Attempt out;
    const int tau = draw_horizon(interval, rng);
    const auto dates = draw_dates(static_cast<std::size_t>(cube.days()), tau, rng);
    if (!dates) return out;
    const auto coin = cube.coins() == 1
                          ? std::uint64_t{0}
                          : rng.uniform_int(0, static_cast<std::uint64_t>(cube.coins() - 1));
    out.skeleton = {static_cast<std::uint32_t>(coin), dates->first, dates->second,
                    static_cast<std::uint32_t>(tau)};
    const auto c = static_cast<Eigen::Index>(coin);
    out.status = valid_price_point(cube, dates->first, c) && valid_price_point(cube, dates->second, c)
                     ? AttemptStatus::accepted
                     : AttemptStatus::rejected;
    return out;
}

Episode price_and_return(const EpisodeSkeleton& skeleton, const PriceCube& cube,
                         const RiskFreeCurve& curve, double fee, CounterRng& rng)
{
    const auto c = static_cast<Eigen::Index>(skeleton.coin);
    const double lb = cube.low(skeleton.buy_day, c);
    const double hb = cube.high(skeleton.buy_day, c);
    const double ls = cube.low(skeleton.sell_day, c);
    const double hs = cube.high(skeleton.sell_day, c);
    const double u1 = rng.uniform01();
    const double u2 = rng.uniform01();
    Episode e;
    e.at = skeleton;
    // Clamp guards the last ulp of L + U (H - L) against rounding past H.
    e.p_buy = std::min(hb, lb + u1 * (hb - lb));
    e.p_sell = std::min(hs, ls + u2 * (hs - ls));
    e.net_return = net_return(e.p_buy, e.p_sell, fee);
    e.rf_return = curve.holding_return(skeleton.buy_day, skeleton.sell_day);
    e.excess_return = e.net_return - e.rf_return;
    return e;
}

void EpisodeBatch::reserve(std::size_t n)
{
    coin.reserve(n);
    buy_day.reserve(n);
    sell_day.reserve(n);
    holding_days.reserve(n);
    p_buy.reserve(n);
    p_sell.reserve(n);
    net_return.reserve(n);
    rf_return.reserve(n);
    excess_return.reserve(n);
}

void EpisodeBatch::push_back(const Episode& e)
{
    coin.push_back(e.at.coin);
    buy_day.push_back(e.at.buy_day);
    sell_day.push_back(e.at.sell_day);
    holding_days.push_back(e.at.holding_days);
    p_buy.push_back(e.p_buy);
    p_sell.push_back(e.p_sell);
    net_return.push_back(e.net_return);
    rf_return.push_back(e.rf_return);
    excess_return.push_back(e.excess_return);
}

Episode EpisodeBatch::episode(std::size_t i) const
{
    return {{coin[i], buy_day[i], sell_day[i], holding_days[i]},
            p_buy[i], p_sell[i], net_return[i], rf_return[i], excess_return[i]};
}

CounterRng attempt_stream(const SimConfig& config, std::uint64_t ordinal)
{
    const std::uint64_t interval_id =
        (std::uint64_t(std::uint32_t(config.interval.lower)) << 32) | std::uint32_t(config.interval.upper);
    return CounterRng::stream(config.seed, {label_id(config.basket), interval_id, ordinal});
}

EpisodeBatch simulate_batch(const SimConfig& config, const PriceCube& cube, const RiskFreeCurve& curve)
{
    config.validate();
    if (curve.gamma.size() < static_cast<std::size_t>(cube.days())) {
        throw std::invalid_argument("risk-free curve shorter than the price calendar");
    }
    EpisodeBatch batch;
    batch.basket = config.basket;
    batch.interval = config.interval;
    batch.calendar_start = cube.start;
    batch.symbols = cube.symbols;
    if (cube.coins() == 0 || cube.days() == 0) return batch;
    batch.reserve(config.n);

    struct Slot
    {
        AttemptStatus status;
        Episode episode;
    };
    std::vector<Slot> slots;
    std::uint64_t next_ordinal = 0;
    int consecutive_failures = 0;
    const unsigned workers = resolve_workers(config.workers);

    while (true) {
        const std::size_t needed = config.n - batch.size();
        // Chunk size depends only on progress, never on the worker count.
        const std::size_t chunk = std::clamp<std::size_t>(needed + needed / 4 + 64, 256, std::size_t{1} << 20);
        slots.resize(chunk);
        parallel_for(chunk, workers, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                auto rng = attempt_stream(config, next_ordinal + i);
                const auto attempt = sample_valid_episode(cube, config.interval, rng);
                slots[i].status = attempt.status;
                if (attempt.status == AttemptStatus::accepted) {
                    slots[i].episode = price_and_return(attempt.skeleton, cube, curve, config.fee, rng);
                }
            }
        });
        for (std::size_t i = 0; i < chunk; ++i) {
            ++batch.attempts;
            switch (slots[i].status) {
            case AttemptStatus::accepted:
                batch.push_back(slots[i].episode);
                consecutive_failures = 0;
                if (batch.size() == config.n) {
                    batch.complete = true;
                    return batch;
                }
                continue;
            case AttemptStatus::discarded: ++batch.discarded; break;
            case AttemptStatus::rejected: ++batch.rejected; break;
            }
            if (++consecutive_failures >= config.max_consecutive_failures) return batch;
        }
        next_ordinal += chunk;
    }
}

} // namespace hodl::sim
