#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hodl::features {

enum class UnitRootOutcome
{
    stationary,
    unit_root,
    ambiguous,
};

enum class TransformTag
{
    level,
    trend,
    rw,
};

std::string_view to_string(UnitRootOutcome o);
std::string_view to_string(TransformTag t);

/// Stationary when DF-GLS and Zivot-Andrews reject (p < level) and KPSS does
/// not (p > level); unit root for the reverse pattern; ambiguous otherwise.
/// Throws std::invalid_argument for p-values outside [0, 1].
UnitRootOutcome decide_stationarity(double dfgls_p, double kpss_p, double za_p, double level = 0.05);

/// LEVEL if the constant-only spec is stationary, else TREND if the
/// constant-plus-trend spec is, else RW.
TransformTag tag_from_decisions(UnitRootOutcome constant_only, UnitRootOutcome with_trend);

/// Most frequent tag; ties go to RW, then TREND, then LEVEL.
TransformTag resolve_global_tag(std::span<const TransformTag> tags);

/// One row of an externally computed unit-root test table.
struct StationarityRecord
{
    std::string series;
    std::string spec; ///< "c" or "ct"
    double dfgls_p = 0;
    double kpss_p = 0;
    double za_p = 0;
};

/// series,spec,dfgls_p,kpss_p,za_p
std::vector<StationarityRecord> read_stationarity_csv(const std::filesystem::path& path);

struct SeriesDecision
{
    std::optional<UnitRootOutcome> constant_only;
    std::optional<UnitRootOutcome> with_trend;

    /// Missing specs count as not stationary.
    TransformTag tag() const;
};

/// series id -> decisions from both specs.
std::map<std::string, SeriesDecision> decide_all(const std::vector<StationarityRecord>& records);

} // namespace hodl::features
