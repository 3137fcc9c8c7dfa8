#pragma once

#include <hodl/calendar.hpp>
#include <hodl/series.hpp>
#include <hodl/simulator.hpp>

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hodl::metrics {

enum class Flavor
{
    overall,
    weekly,
};

std::string_view to_string(Flavor f);

inline constexpr double overall_alpha = 0.01;
inline constexpr double weekly_alpha = 0.10;
inline constexpr double significant_loss = -0.10;

/// Statistic suite over one sample of excess returns. Undefined statistics
/// are nullopt (empty CSV cell, JSON null).
struct MetricSet
{
    std::size_t n = 0;
    double mean = 0;
    double median = 0;
    std::optional<double> std;
    double iqr = 0;
    std::optional<double> sharpe;
    std::optional<double> sortino;
    double var = 0;
    double cvar = 0;
    double p_profit = 0;
    double p_sig_loss = 0;
    double q75 = 0;
    double top25_mean = 0;
    double top25_prop = 0;
    std::optional<double> skew;
    std::optional<double> kurt;
    double alpha = overall_alpha;
    Flavor flavor = Flavor::overall;
};

/// Linear interpolation between order statistics at position (n-1)p.
double quantile_sorted(std::span<const double> sorted, double p);

/// Requires n >= 1 and alpha in (0, 1); throws std::invalid_argument otherwise.
MetricSet compute_metrics(std::span<const double> sample, double alpha, Flavor flavor);

/// Same as compute_metrics but the caller guarantees ascending order.
MetricSet compute_metrics_sorted(std::span<const double> sorted, double alpha, Flavor flavor);

inline constexpr std::string_view pooled_label = "pooled";

struct OverallRow
{
    std::string basket;
    /// Interval label ("731-1095"), or "pooled" for the per-basket row.
    std::string interval;
    MetricSet metrics;
};

/// One row per (basket, interval) at alpha = 1%, then one pooled row per
/// basket over all of that basket's episodes. Empty batches emit no row.
std::vector<OverallRow> aggregate_overall(const std::vector<const sim::EpisodeBatch*>& batches);

struct WeeklyMetricPanel
{
    std::string basket;
    sim::HorizonInterval interval;
    std::vector<Date> week_mondays;
    std::vector<MetricSet> metrics;
};

/// Groups episodes by the Monday of their sell week; alpha = 10%, no
/// skewness or kurtosis.
WeeklyMetricPanel aggregate_weekly(const sim::EpisodeBatch& batch);

/// Endogenous targets in registry order.
inline constexpr std::array<std::string_view, 4> target_names{"median_er", "cvar10", "top25_mean", "sharpe"};

/// Weekly series of each endogenous target; weeks where a target is
/// undefined are left out of that target's series.
std::map<std::string, WeeklySeries> endogenous_targets(const WeeklyMetricPanel& panel);

void write_overall_csv(const std::filesystem::path& path, const std::vector<OverallRow>& rows);
void write_overall_json(const std::filesystem::path& path, const std::vector<OverallRow>& rows);
void write_weekly_csv(const std::filesystem::path& path, const std::vector<WeeklyMetricPanel>& panels);
void write_weekly_json(const std::filesystem::path& path, const std::vector<WeeklyMetricPanel>& panels);

/// Headline table: Basket, Horizon, mean, median, std, sharpe, sortino,
/// var_1, cvar_1, p_sig_loss, q75, top25_mean (per-interval rows only).
void write_key_statistics_csv(const std::filesystem::path& path, const std::vector<OverallRow>& rows);
std::vector<std::string> key_statistics_columns();

/// basket,horizon,week,<targets...>; horizon = interval upper bound in days.
void write_weekly_targets_csv(const std::filesystem::path& path, const std::vector<WeeklyMetricPanel>& panels);

/// basket -> horizon -> target -> series.
using TargetTable = std::map<std::string, std::map<int, std::map<std::string, WeeklySeries>>>;
TargetTable read_weekly_targets_csv(const std::filesystem::path& path);

std::vector<OverallRow> read_overall_csv(const std::filesystem::path& path);

} // namespace hodl::metrics
