#pragma once

#include <hodl/calendar.hpp>
#include <hodl/panel.hpp>
#include <hodl/rng.hpp>
#include <hodl/series.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace hodl::synth {

/// Standard normal via Box-Muller.
double normal(CounterRng& rng);

struct TokenSpec
{
    std::string symbol;
    double start_price = 100;
    /// Daily log drift and volatility.
    double drift = 0.0005;
    double vol = 0.04;
    double volume = 5e7;
};

/// Geometric random walk with intraday high/low around each close.
panel::TokenPanel make_token(const TokenSpec& spec, Date start, std::size_t days, std::uint64_t seed);

/// Mean-reverting daily series on business days (weekends skipped).
DailySeries make_macro(Date start, std::size_t days, double level, double vol, double reversion, std::uint64_t seed,
                       bool business_days = true);

struct DemoOptions
{
    std::size_t days = 3650;
    Date end = Date{std::chrono::year{2025} / 6 / 30};
    std::uint64_t seed = 2024;
    std::size_t n = 10000;
};

/// Writes tokens/, macro/, fgi.csv, riskfree.csv, stationarity.csv and a
/// run.json into `dir`.
void write_demo_dataset(const std::filesystem::path& dir, const DemoOptions& options = {});

} // namespace hodl::synth
