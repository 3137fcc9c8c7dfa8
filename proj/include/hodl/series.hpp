#pragma once

#include <hodl/calendar.hpp>

#include <cstddef>
#include <vector>

namespace hodl {

/// Daily observations; missing values are NaN.
struct DailySeries
{
    std::vector<Date> dates;
    std::vector<double> values;
};

/// One value per ISO week, stamped on the week's Monday.
struct WeeklySeries
{
    std::vector<Date> week_mondays;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    bool empty() const { return values.empty(); }
};

} // namespace hodl
