#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace hodl {

/// UTC calendar day.
using Date = std::chrono::sys_days;

/// Parses `YYYY-MM-DD` (a trailing time component such as `T00:00:00` or
/// ` 00:00:00+00:00` is ignored). Returns nullopt on malformed input.
std::optional<Date> parse_date(std::string_view text);

std::string format_date(Date d);

/// ISO weekday, Monday = 1 ... Sunday = 7.
inline unsigned iso_weekday(Date d)
{
    return std::chrono::weekday{d}.iso_encoding();
}

/// Monday that starts the ISO (Monday-Sunday) week containing `d`.
inline Date week_monday(Date d)
{
    return d - std::chrono::days{iso_weekday(d) - 1};
}

inline long days_between(Date from, Date to)
{
    return (to - from).count();
}

} // namespace hodl
