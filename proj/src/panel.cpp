#include <hodl/panel.hpp>

#include <hodl/csv.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace hodl::panel {

namespace fs = std::filesystem;

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

std::string row_warning(const std::string& symbol, std::size_t row, const std::string& what)
{
    return symbol + ": row " + std::to_string(row) + ": " + what;
}

} // namespace

bool TokenPanel::row_complete(std::size_t i) const
{
    return std::isfinite(high[i]) && std::isfinite(low[i]) && std::isfinite(close[i]) &&
           std::isfinite(volume[i]);
}

TokenPanel TokenPanel::slice(std::size_t begin, std::size_t end) const
{
    TokenPanel out;
    out.symbol = symbol;
    out.flagged_rows = flagged_rows;
    end = std::min(end, size());
    begin = std::min(begin, end);
    out.dates.assign(dates.begin() + begin, dates.begin() + end);
    out.high.assign(high.begin() + begin, high.begin() + end);
    out.low.assign(low.begin() + begin, low.begin() + end);
    out.close.assign(close.begin() + begin, close.begin() + end);
    out.volume.assign(volume.begin() + begin, volume.begin() + end);
    return out;
}

const TokenPanel* PanelSet::find(std::string_view symbol) const
{
    for (const auto& p : panels) {
        if (p.symbol == symbol) return &p;
    }
    return nullptr;
}

void CleaningRules::validate() const
{
    const double values[] = {stablecoin_close_lo, stablecoin_close_hi, stablecoin_close_std_max,
                             min_avg_volume_usd, quality_tiny_volume_usd};
    for (double v : values) {
        if (!std::isfinite(v) || v < 0) {
            throw std::invalid_argument("cleaning rules: thresholds must be finite and nonnegative");
        }
    }
    if (!(stablecoin_close_lo < stablecoin_close_hi)) {
        throw std::invalid_argument("cleaning rules: stablecoin band lower must be < upper");
    }
    if (volume_window_days <= 0 || quality_zero_days_max < 0) {
        throw std::invalid_argument("cleaning rules: day counts must be positive");
    }
}

std::string_view to_string(ExclusionReason reason)
{
    switch (reason) {
    case ExclusionReason::first_date_cutoff: return "first_date_cutoff";
    case ExclusionReason::stablecoin: return "stablecoin";
    case ExclusionReason::low_volume: return "low_volume";
    case ExclusionReason::stale_latest_date: return "stale_latest_date";
    case ExclusionReason::missing_values: return "missing_values";
    case ExclusionReason::quality_screen: return "quality_screen";
    }
    return "unknown";
}

TokenPanel load_token_csv(const fs::path& path, std::string symbol,
                          std::vector<std::string>& warnings)
{
    const auto table = csv::read(path);
    const auto c_date = table.column("Date");
    const auto c_high = table.column("High");
    const auto c_low = table.column("Low");
    const auto c_close = table.column("Close");
    const auto c_volume = table.column("Volume");
    if (!c_date || !c_high || !c_low || !c_close || !c_volume) {
        throw std::runtime_error(symbol + ": header must contain Date,High,Low,Close,Volume");
    }

    struct Row
    {
        double high, low, close, volume;
        bool flagged;
    };
    std::map<Date, Row> rows;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& f = table.rows[r];
        auto field = [&](std::size_t c) -> std::string_view {
            return c < f.size() ? std::string_view(f[c]) : std::string_view{};
        };
        const auto date = parse_date(field(*c_date));
        if (!date) {
            warnings.push_back(row_warning(symbol, r + 1, "unparseable date, row skipped"));
            continue;
        }
        Row row{nan, nan, nan, nan, false};
        const std::pair<std::size_t, double*> cols[] = {
            {*c_high, &row.high}, {*c_low, &row.low}, {*c_close, &row.close}, {*c_volume, &row.volume}};
        for (auto [c, slot] : cols) {
            const auto text = field(c);
            if (auto v = csv::parse_number(text)) {
                *slot = *v;
            } else if (!text.empty() && text != "." && text != "NaN" && text != "nan") {
                row.flagged = true;
            }
        }
        if (row.flagged) {
            warnings.push_back(row_warning(symbol, r + 1, "non-numeric field flagged missing"));
        }
        if (rows.count(*date)) {
            warnings.push_back(row_warning(symbol, r + 1, "duplicate date, later row kept"));
        }
        rows[*date] = row;
    }

    TokenPanel p;
    p.symbol = std::move(symbol);
    if (rows.empty()) return p;
    const Date first = rows.begin()->first;
    const Date last = rows.rbegin()->first;
    const auto n = static_cast<std::size_t>(days_between(first, last) + 1);
    p.dates.resize(n);
    p.high.assign(n, nan);
    p.low.assign(n, nan);
    p.close.assign(n, nan);
    p.volume.assign(n, nan);
    for (std::size_t i = 0; i < n; ++i) p.dates[i] = first + std::chrono::days{i};
    for (const auto& [d, row] : rows) {
        const auto i = static_cast<std::size_t>(days_between(first, d));
        p.high[i] = row.high;
        p.low[i] = row.low;
        p.close[i] = row.close;
        p.volume[i] = row.volume;
        p.flagged_rows += row.flagged ? 1 : 0;
    }
    return p;
}

PanelSet load_panel_set(const fs::path& directory)
{
    std::error_code ec;
    if (!fs::is_directory(directory, ec)) {
        throw std::runtime_error("cannot read token directory " + directory.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    if (ec) throw std::runtime_error("cannot read token directory " + directory.string());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.stem().string() < b.stem().string(); });

    PanelSet set;
    if (files.empty()) set.warnings.push_back("no token files in " + directory.string());
    for (const auto& file : files) {
        try {
            set.panels.push_back(load_token_csv(file, file.stem().string(), set.warnings));
        } catch (const std::exception& e) {
            set.warnings.push_back(std::string("skipped ") + file.filename().string() + ": " + e.what());
        }
    }
    return set;
}

bool detect_stablecoin(const TokenPanel& panel, const CleaningRules& rules,
                       std::vector<std::string>* warnings)
{
    std::vector<double> closes;
    for (double c : panel.close) {
        if (std::isfinite(c)) closes.push_back(c);
    }
    if (closes.size() < 2) {
        if (warnings) warnings->push_back(panel.symbol + ": fewer than 2 closes, not classifiable as stablecoin");
        return false;
    }
    const double n = static_cast<double>(closes.size());
    double mean = 0.0;
    for (double c : closes) mean += c;
    mean /= n;
    double ss = 0.0;
    for (double c : closes) ss += (c - mean) * (c - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    return mean >= rules.stablecoin_close_lo && mean <= rules.stablecoin_close_hi &&
           sd <= rules.stablecoin_close_std_max;
}

namespace {

std::optional<ExclusionReason> screen(const TokenPanel& raw, const CleaningRules& rules,
                                      TokenPanel& cleaned)
{
    std::size_t start = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw.row_complete(i)) {
            start = i;
            break;
        }
    }
    // The cutoff is judged on the first fully observed day so that a second
    // pass over already-trimmed panels reaches the same verdict.
    if (raw.empty()) return ExclusionReason::missing_values;
    const Date first = start < raw.size() ? raw.dates[start] : raw.dates.front();
    if (first >= rules.min_first_date_cutoff) return ExclusionReason::first_date_cutoff;
    if (start == raw.size()) return ExclusionReason::missing_values;

    TokenPanel view = raw.slice(start, raw.size());
    if (detect_stablecoin(view, rules)) return ExclusionReason::stablecoin;

    const Date last = view.dates.back();
    const Date window_start = last - std::chrono::days{rules.volume_window_days - 1};
    double vol_sum = 0.0;
    std::size_t vol_n = 0;
    for (std::size_t i = 0; i < view.size(); ++i) {
        if (view.dates[i] >= window_start && std::isfinite(view.volume[i])) {
            vol_sum += view.volume[i];
            ++vol_n;
        }
    }
    const double avg_volume = vol_n ? vol_sum / double(vol_n) : 0.0;
    if (avg_volume < rules.min_avg_volume_usd) return ExclusionReason::low_volume;

    std::optional<Date> latest;
    for (std::size_t i = view.size(); i-- > 0;) {
        if (std::isfinite(view.close[i])) {
            latest = view.dates[i];
            break;
        }
    }
    if (!latest || *latest < rules.min_latest_date) return ExclusionReason::stale_latest_date;

    for (std::size_t i = 0; i < view.size(); ++i) {
        if (!view.row_complete(i)) return ExclusionReason::missing_values;
    }

    int zero_days = 0;
    int tiny_days = 0;
    for (std::size_t i = 0; i < view.size(); ++i) {
        zero_days += (view.high[i] == 0.0 || view.volume[i] == 0.0) ? 1 : 0;
        tiny_days += view.volume[i] < rules.quality_tiny_volume_usd ? 1 : 0;
    }
    if (zero_days >= rules.quality_zero_days_max || tiny_days >= rules.quality_zero_days_max) {
        return ExclusionReason::quality_screen;
    }
    cleaned = std::move(view);
    return std::nullopt;
}

} // namespace

CleaningResult apply_cleaning_rules(const PanelSet& panels, const CleaningRules& rules)
{
    rules.validate();
    CleaningResult result;
    for (const auto& p : panels.panels) {
        TokenPanel cleaned;
        if (auto reason = screen(p, rules, cleaned)) {
            result.excluded[p.symbol] = *reason;
        } else {
            result.retained.push_back(std::move(cleaned));
        }
    }
    std::sort(result.retained.begin(), result.retained.end(),
              [](const TokenPanel& a, const TokenPanel& b) { return a.symbol < b.symbol; });
    return result;
}

WeeklySeries weekly_align_macro(const DailySeries& daily)
{
    struct Slot
    {
        double thursday = nan;
        double friday = nan;
    };
    std::map<Date, Slot> weeks;
    for (std::size_t i = 0; i < daily.dates.size(); ++i) {
        const double v = daily.values[i];
        if (!std::isfinite(v)) continue;
        const Date d = daily.dates[i];
        const unsigned wd = iso_weekday(d);
        if (wd == 4) weeks[week_monday(d)].thursday = v;
        if (wd == 5) weeks[week_monday(d)].friday = v;
    }
    WeeklySeries out;
    for (const auto& [monday, slot] : weeks) {
        const double v = std::isfinite(slot.friday) ? slot.friday : slot.thursday;
        if (!std::isfinite(v)) continue;
        out.week_mondays.push_back(monday);
        out.values.push_back(v);
    }
    return out;
}

WeeklySeries weekly_fgi_mean(const DailySeries& daily)
{
    std::map<Date, std::pair<double, int>> weeks;
    for (std::size_t i = 0; i < daily.dates.size(); ++i) {
        if (!std::isfinite(daily.values[i])) continue;
        auto& [sum, count] = weeks[week_monday(daily.dates[i])];
        sum += daily.values[i];
        ++count;
    }
    WeeklySeries out;
    for (const auto& [monday, acc] : weeks) {
        out.week_mondays.push_back(monday);
        out.values.push_back(acc.first / acc.second);
    }
    return out;
}

WeeklySeries btc_weekly_log_return(const TokenPanel& btc)
{
    // Latest observed close of each week; Sunday wins because it is the
    // latest day of the week.
    std::map<Date, std::pair<Date, double>> week_close;
    for (std::size_t i = 0; i < btc.size(); ++i) {
        const double c = btc.close[i];
        if (!std::isfinite(c)) continue;
        if (c <= 0.0) {
            throw std::domain_error(btc.symbol + ": nonpositive close on " + format_date(btc.dates[i]));
        }
        auto [it, inserted] = week_close.try_emplace(week_monday(btc.dates[i]), btc.dates[i], c);
        if (!inserted && btc.dates[i] > it->second.first) it->second = {btc.dates[i], c};
    }
    WeeklySeries out;
    const std::pair<const Date, std::pair<Date, double>>* prev = nullptr;
    for (const auto& entry : week_close) {
        if (prev && entry.first - prev->first == std::chrono::days{7}) {
            out.week_mondays.push_back(entry.first);
            out.values.push_back(std::log(entry.second.second / prev->second.second));
        }
        prev = &entry;
    }
    return out;
}

DailySeries read_daily_series(const fs::path& path)
{
    const auto table = csv::read(path);
    const std::size_t c_date = table.column("Date").value_or(table.column("observation_date").value_or(0));
    std::size_t c_value = 1;
    if (auto c = table.column("Value")) c_value = *c;
    if (table.header.size() <= std::max(c_date, c_value)) {
        throw std::runtime_error(path.string() + ": expected Date,Value columns");
    }
    std::map<Date, double> values;
    for (const auto& row : table.rows) {
        if (row.size() <= std::max(c_date, c_value)) continue;
        const auto d = parse_date(row[c_date]);
        if (!d) continue;
        values[*d] = csv::parse_number(row[c_value]).value_or(nan);
    }
    DailySeries out;
    for (const auto& [d, v] : values) {
        out.dates.push_back(d);
        out.values.push_back(v);
    }
    return out;
}

void write_token_csv(const fs::path& path, const TokenPanel& panel)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "Date,High,Low,Close,Volume\n";
    for (std::size_t i = 0; i < panel.size(); ++i) {
        out << format_date(panel.dates[i]) << ',' << csv::format_number(panel.high[i]) << ','
            << csv::format_number(panel.low[i]) << ',' << csv::format_number(panel.close[i]) << ','
            << csv::format_number(panel.volume[i]) << '\n';
    }
}

void write_exclusions_json(const fs::path& path, const std::map<std::string, ExclusionReason>& excluded)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [symbol, reason] : excluded) j[symbol] = std::string(to_string(reason));
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void write_weekly_table(const fs::path& path, const std::map<std::string, WeeklySeries>& columns)
{
    std::set<Date> mondays;
    std::vector<std::map<Date, double>> lookup;
    for (const auto& [name, s] : columns) {
        auto& m = lookup.emplace_back();
        for (std::size_t i = 0; i < s.size(); ++i) {
            mondays.insert(s.week_mondays[i]);
            m[s.week_mondays[i]] = s.values[i];
        }
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "Date";
    for (const auto& [name, s] : columns) out << ',' << name;
    out << '\n';
    for (Date d : mondays) {
        out << format_date(d);
        for (const auto& m : lookup) {
            auto it = m.find(d);
            out << ',' << (it == m.end() ? std::string{} : csv::format_number(it->second));
        }
        out << '\n';
    }
}

std::map<std::string, WeeklySeries> read_weekly_table(const fs::path& path)
{
    const auto table = csv::read(path);
    std::map<std::string, WeeklySeries> out;
    for (std::size_t c = 1; c < table.header.size(); ++c) {
        auto& s = out[table.header[c]];
        for (const auto& row : table.rows) {
            const auto d = parse_date(row.empty() ? std::string{} : row[0]);
            if (!d || c >= row.size()) continue;
            if (auto v = csv::parse_number(row[c])) {
                s.week_mondays.push_back(*d);
                s.values.push_back(*v);
            }
        }
    }
    return out;
}

} // namespace hodl::panel
