#include <hodl/csv.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace hodl::csv {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool iequals(std::string_view a, std::string_view b)
{
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) ==
                      std::tolower(static_cast<unsigned char>(y));
           });
}

} // namespace

std::optional<std::size_t> Table::column(std::string_view name) const
{
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (iequals(trim(header[i]), name)) return i;
    }
    return std::nullopt;
}

std::vector<std::string> split_line(std::string_view line)
{
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return out;
}

Table read(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Table t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split_line(line);
        if (!have_header) {
            if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
            t.header = std::move(fields);
            have_header = true;
        } else {
            t.rows.push_back(std::move(fields));
        }
    }
    return t;
}

std::optional<double> parse_number(std::string_view field)
{
    field = trim(field);
    if (field.empty() || field == "." || iequals(field, "nan") || iequals(field, "null")) {
        return std::nullopt;
    }
    if (field.front() == '+') field.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::string format_number(double x)
{
    if (!std::isfinite(x)) return "";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return buf;
    }
    return std::string(buf, ptr);
}

std::string format_optional(const std::optional<double>& x)
{
    return x ? format_number(*x) : std::string{};
}

} // namespace hodl::csv
