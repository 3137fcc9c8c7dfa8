#pragma once

#include <hodl/metrics.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hodl::report {

inline constexpr double bubble_min_area = 400;
inline constexpr double bubble_max_area = 2800;

/// min(max(400 (1 + 1.5 z), 400), 2800)
double bubble_area(double z);

enum class Layout
{
    /// x = CVaR 1%, y = Sharpe, size by p_sig_loss.
    risk_return,
    /// x = median, y = top-quartile mean, size by IQR.
    upside,
};

std::string_view to_string(Layout layout);

struct BubblePoint
{
    std::string basket;
    std::string horizon;
    double x = 0;
    double y = 0;
    double size_value = 0;
    double z = 0;
    double area = bubble_min_area;
    std::string color;
};

/// One point per (basket, interval) row; z standardizes the size metric
/// within each basket with the sample standard deviation (z = 0 when a
/// basket has a single horizon or no spread). Rows missing an axis value
/// are skipped.
std::vector<BubblePoint> bubble_points(const std::vector<metrics::OverallRow>& rows, Layout layout);

std::string render_bubble_svg(const std::vector<BubblePoint>& points, Layout layout);

void write_bubble_csv(const std::filesystem::path& path, const std::vector<BubblePoint>& points);
std::vector<BubblePoint> read_bubble_csv(const std::filesystem::path& path);

/// Writes <stem>.svg and <stem>.csv for both layouts into `dir`; returns the
/// files written.
std::vector<std::filesystem::path> write_bubble_charts(const std::filesystem::path& dir,
                                                       const std::vector<metrics::OverallRow>& rows);

} // namespace hodl::report
