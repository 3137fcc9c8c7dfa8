#pragma once

#include <hodl/calendar.hpp>
#include <hodl/series.hpp>

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hodl::panel {

/// Daily High/Low/Close/Volume for one token on a contiguous calendar-day
/// axis. Missing observations are NaN.
struct TokenPanel
{
    std::string symbol;
    std::vector<Date> dates;
    std::vector<double> high;
    std::vector<double> low;
    std::vector<double> close;
    std::vector<double> volume;
    /// Rows that carried a non-numeric field in the source file.
    std::size_t flagged_rows = 0;

    std::size_t size() const { return dates.size(); }
    bool empty() const { return dates.empty(); }
    bool row_complete(std::size_t i) const;
    TokenPanel slice(std::size_t begin, std::size_t end) const;
};

struct PanelSet
{
    std::vector<TokenPanel> panels;
    std::vector<std::string> warnings;

    std::size_t size() const { return panels.size(); }
    const TokenPanel* find(std::string_view symbol) const;
};

struct CleaningRules
{
    Date min_first_date_cutoff = Date{std::chrono::year{2024} / 1 / 1};
    double stablecoin_close_lo = 0.97;
    double stablecoin_close_hi = 1.03;
    double stablecoin_close_std_max = 0.03;
    double min_avg_volume_usd = 100000.0;
    int volume_window_days = 365;
    Date min_latest_date = Date{std::chrono::year{2025} / 4 / 26};
    int quality_zero_days_max = 10;
    double quality_tiny_volume_usd = 500.0;

    /// Throws std::invalid_argument on non-finite or inconsistent thresholds.
    void validate() const;
};

/// Exclusion reasons in the order the rules are applied.
enum class ExclusionReason
{
    first_date_cutoff,
    stablecoin,
    low_volume,
    stale_latest_date,
    missing_values,
    quality_screen,
};

std::string_view to_string(ExclusionReason reason);

struct CleaningResult
{
    std::vector<TokenPanel> retained;
    std::map<std::string, ExclusionReason> excluded;
};

/// Parses one token file (header Date,High,Low,Close,Volume in any column
/// order). Rows are reindexed onto a contiguous daily axis; gaps become NaN.
/// Malformed rows are flagged and reported through `warnings`.
TokenPanel load_token_csv(const std::filesystem::path& path, std::string symbol,
                          std::vector<std::string>& warnings);

/// Loads every `*.csv` in `directory` (symbol = file stem), in symbol order.
/// Throws std::runtime_error if the directory cannot be read; per-token
/// failures become warnings.
PanelSet load_panel_set(const std::filesystem::path& directory);

/// Mean close in the stablecoin band and sample std of close at or below the
/// limit. Fewer than two observed closes: false, with a warning.
bool detect_stablecoin(const TokenPanel& panel, const CleaningRules& rules = {},
                       std::vector<std::string>* warnings = nullptr);

/// Applies the cleaning rules in fixed order and records the first rule that
/// removed each excluded token. Idempotent.
CleaningResult apply_cleaning_rules(const PanelSet& panels, const CleaningRules& rules = {});

/// Friday value of each Monday-Sunday week, else Thursday; stamped on Monday.
WeeklySeries weekly_align_macro(const DailySeries& daily);

/// Monday-Sunday mean of the available days, stamped on Monday.
WeeklySeries weekly_fgi_mean(const DailySeries& daily);

/// ln(P_t / P_{t-1}) with P_t the Sunday close of week t (else the last
/// observed close that week), stamped on week t's Monday. Only consecutive
/// weeks produce a return. Throws std::domain_error on a nonpositive close.
WeeklySeries btc_weekly_log_return(const TokenPanel& btc);

/// Date,Value file (the value column is `Value` if present, else column 2).
DailySeries read_daily_series(const std::filesystem::path& path);

void write_token_csv(const std::filesystem::path& path, const TokenPanel& panel);
void write_exclusions_json(const std::filesystem::path& path,
                           const std::map<std::string, ExclusionReason>& excluded);

/// Columns Date,<name>... on the union of Mondays; absent values left empty.
void write_weekly_table(const std::filesystem::path& path,
                        const std::map<std::string, WeeklySeries>& columns);
std::map<std::string, WeeklySeries> read_weekly_table(const std::filesystem::path& path);

} // namespace hodl::panel
