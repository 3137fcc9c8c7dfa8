#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hodl::csv {

struct Table
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by case-insensitive name, or nullopt.
    std::optional<std::size_t> column(std::string_view name) const;
};

/// Reads a comma-separated file with a header row. Throws std::runtime_error
/// if the file cannot be opened.
Table read(const std::filesystem::path& path);

std::vector<std::string> split_line(std::string_view line);

/// Strict double parse; empty, ".", "NaN" and "null" map to nullopt.
std::optional<double> parse_number(std::string_view field);

/// Shortest round-trip representation.
std::string format_number(double x);

/// Empty cell for nullopt or non-finite values.
std::string format_optional(const std::optional<double>& x);

} // namespace hodl::csv
