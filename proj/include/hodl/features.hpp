#pragma once

#include <hodl/calendar.hpp>
#include <hodl/series.hpp>
#include <hodl/stationarity.hpp>
#include <hodl/transforms.hpp>

#include <Eigen/Core>

#include <array>
#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hodl::features {

inline constexpr std::array<int, 6> default_horizons{30, 90, 180, 365, 730, 1095};
inline constexpr std::array<int, 4> feature_windows{4, 8, 12, 24};

/// ceil(days / 7)
constexpr int weeks_ceil(int days) { return (days + 6) / 7; }

/// Training gap in weeks for a horizon in days: ceil(h/7) + 1.
constexpr int gap_weeks(int horizon_days) { return weeks_ceil(horizon_days) + 1; }

enum class SeriesRole
{
    macro,
    endogenous,
};

/// LEVEL passes through; TREND is rolling-detrended; RW is fractionally
/// differenced for macro series and first-differenced for endogenous ones.
OffsetSeries<double> apply_tag(const Vector<double>& x, TransformTag tag, SeriesRole role);

/// apply_tag on a weekly series, keeping the dates of the defined outputs.
WeeklySeries transform_weekly(const WeeklySeries& series, TransformTag tag, SeriesRole role);

enum class Family
{
    ema,
    vol,
};

/// Identifies a macro feature "<base>_EMA<w>" or "<base>_VOL<w>". Ordering is
/// the registry order: base, then family (EMA before VOL), then window.
struct FeatureKey
{
    std::string base;
    Family family = Family::ema;
    int window = 0;

    std::string name() const;
    static std::optional<FeatureKey> parse(std::string_view name);

    friend auto operator<=>(const FeatureKey&, const FeatureKey&) = default;
};

/// EMA and VOL features of one transformed macro series for every window.
std::map<std::string, WeeklySeries> ema_vol_features(const std::string& base, const WeeklySeries& transformed,
                                                     std::span<const int> windows = feature_windows);

/// Sorts feature names into registry order; names that do not parse as
/// FeatureKey sort after all parsed ones, alphabetically.
std::vector<std::string> registry_order(std::vector<std::string> names);

/// Display label of a feature or endogenous target.
struct FeatureLabel
{
    std::string label;
    std::string series;
    std::string transform;
};

FeatureLabel feature_label(std::string_view name);

/// Time x variable matrices per horizon on a common weekly grid.
struct FeatureTensor
{
    std::string basket;
    std::vector<Date> grid;
    std::vector<int> horizons;
    std::vector<std::string> targets;
    std::vector<std::string> features;
    /// Aligned, transformed, not standardized. One T x n matrix per horizon.
    std::vector<Eigen::MatrixXd> y_raw;
    std::vector<Eigen::MatrixXd> x_raw;
    /// Causally standardized.
    std::vector<Eigen::MatrixXd> y_current;
    std::vector<Eigen::MatrixXd> x_macro;
    /// t_star x n_y per horizon: y_future[h].row(t) = y_current[h].row(t + gap(h)).
    std::vector<Eigen::MatrixXd> y_future;
    std::vector<int> gaps;
    Eigen::Index t_star = 0;
    double epsilon = zscore_floor;
    /// H x n_y and H x n_x clipped expanding standard deviations at t_star.
    Eigen::MatrixXd ref_scale_y;
    Eigen::MatrixXd ref_scale_x;
    /// Transform tag per input series.
    std::map<std::string, std::string> tags;

    Eigen::Index periods() const { return Eigen::Index(grid.size()); }
    std::size_t horizon_index(int horizon_days) const;
    std::optional<std::size_t> feature_index(std::string_view name) const;
};

/// Per-horizon endogenous series keyed by target name.
using HorizonTargets = std::map<std::string, WeeklySeries>;

/// Restricts every horizon's targets and all macro features to the dates on
/// which all of them are defined. Targets keep `target_order`; features are
/// put in registry order. Throws std::runtime_error naming the narrowest
/// series when the intersection is empty.
FeatureTensor align_tensors(const std::vector<HorizonTargets>& endogenous,
                            const std::map<std::string, WeeklySeries>& macro, std::vector<int> horizons,
                            std::span<const std::string_view> target_order);

/// Fills y_current and x_macro from the raw matrices.
void standardize_tensor(FeatureTensor& tensor, double eps = zscore_floor);

struct FutureTargets
{
    std::vector<Eigen::MatrixXd> y_future;
    Eigen::Index t_star = 0;
};

/// t* = T - max gap; row t of horizon h is row t + gap(h) of y_current.
/// Throws std::runtime_error when T <= max gap.
FutureTargets build_future_targets(const std::vector<Eigen::MatrixXd>& y_current, std::span<const int> horizons);

/// Clipped expanding population std over the first t_star rows of each
/// column; H x n.
Eigen::MatrixXd reference_scales(const std::vector<Eigen::MatrixXd>& raw, Eigen::Index t_star,
                                 double eps = zscore_floor);

/// Decision lookup for endogenous series: "<basket>:<target>@<h>" first, then
/// "<target>@<h>".
std::optional<TransformTag> endogenous_tag(const std::map<std::string, SeriesDecision>& decisions,
                                           const std::string& basket, const std::string& target,
                                           std::span<const int> horizons, std::vector<std::string>* log);

/// Full composition: tag transform -> EMA/VOL -> alignment -> causal z-score
/// -> future targets -> reference scales. Series without decisions are
/// treated as RW and reported in `log`.
FeatureTensor build_feature_tensor(const std::string& basket, const std::map<int, HorizonTargets>& targets_by_horizon,
                                   const std::map<std::string, WeeklySeries>& macro_raw,
                                   const std::map<std::string, SeriesDecision>& decisions,
                                   std::vector<std::string>* log = nullptr);

/// Writes tensor_meta.json plus per-horizon CSV matrices into `dir`.
void write_tensor(const std::filesystem::path& dir, const FeatureTensor& tensor);
FeatureTensor read_tensor(const std::filesystem::path& dir);

} // namespace hodl::features
