#pragma once

#include <hodl/calendar.hpp>
#include <hodl/panel.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

namespace hodl::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir
{
public:
    explicit TempDir(const std::string& tag)
    {
        static std::atomic<int> counter{0};
        _path = std::filesystem::temp_directory_path() /
                ("hodl_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(_path);
        std::filesystem::create_directories(_path);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(_path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return _path; }
    std::filesystem::path operator/(const std::string& name) const { return _path / name; }

private:
    std::filesystem::path _path;
};

inline Date ymd(int y, unsigned m, unsigned d)
{
    return Date{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

/// Flat panel: constant prices and volume over `days` days from `start`.
inline panel::TokenPanel flat_panel(const std::string& symbol, Date start, std::size_t days, double price = 100.0,
                                    double volume = 1e6)
{
    panel::TokenPanel p;
    p.symbol = symbol;
    for (std::size_t i = 0; i < days; ++i) {
        p.dates.push_back(start + std::chrono::days{i});
        p.high.push_back(price * 1.01);
        p.low.push_back(price * 0.99);
        p.close.push_back(price);
        p.volume.push_back(volume);
    }
    return p;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::filesystem::create_directories(path.parent_path());
    std::ofstream(path) << text;
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 0.0)
{
    return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

} // namespace hodl::testing
