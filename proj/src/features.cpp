#include <hodl/features.hpp>

#include <hodl/csv.hpp>
#include <hodl/metrics.hpp>

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hodl::features {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

OffsetSeries<double> apply_tag(const Vector<double>& x, TransformTag tag, SeriesRole role)
{
    switch (tag) {
    case TransformTag::level: return {0, x};
    case TransformTag::trend: return rolling_detrend(x);
    case TransformTag::rw: return role == SeriesRole::macro ? frac_diff(x) : first_diff(x);
    }
    throw std::logic_error("unknown transform tag");
}

namespace {

WeeklySeries with_dates(const WeeklySeries& src, const OffsetSeries<double>& s)
{
    WeeklySeries out;
    out.values.assign(s.values.data(), s.values.data() + s.values.size());
    out.week_mondays.assign(src.week_mondays.begin() + s.offset,
                            src.week_mondays.begin() + s.offset + s.values.size());
    return out;
}

Vector<double> as_vector(const WeeklySeries& s)
{
    return Eigen::Map<const Vector<double>>(s.values.data(), Eigen::Index(s.values.size()));
}

} // namespace

WeeklySeries transform_weekly(const WeeklySeries& series, TransformTag tag, SeriesRole role)
{
    return with_dates(series, apply_tag(as_vector(series), tag, role));
}

std::string FeatureKey::name() const
{
    return base + (family == Family::ema ? "_EMA" : "_VOL") + std::to_string(window);
}

std::optional<FeatureKey> FeatureKey::parse(std::string_view name)
{
    const auto us = name.rfind('_');
    if (us == std::string_view::npos || us == 0) return std::nullopt;
    const auto suffix = name.substr(us + 1);
    FeatureKey key;
    key.base = std::string(name.substr(0, us));
    std::string_view digits;
    if (suffix.rfind("EMA", 0) == 0) {
        key.family = Family::ema;
        digits = suffix.substr(3);
    } else if (suffix.rfind("VOL", 0) == 0) {
        key.family = Family::vol;
        digits = suffix.substr(3);
    } else {
        return std::nullopt;
    }
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), key.window);
    if (ec != std::errc{} || p != digits.data() + digits.size() || key.window < 1) return std::nullopt;
    return key;
}

std::map<std::string, WeeklySeries> ema_vol_features(const std::string& base, const WeeklySeries& transformed,
                                                     std::span<const int> windows)
{
    std::map<std::string, WeeklySeries> out;
    const auto x = as_vector(transformed);
    for (int w : windows) {
        out[FeatureKey{base, Family::ema, w}.name()] = with_dates(transformed, ema(x, w));
        out[FeatureKey{base, Family::vol, w}.name()] = with_dates(transformed, rolling_vol(x, w));
    }
    return out;
}

std::vector<std::string> registry_order(std::vector<std::string> names)
{
    std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
        const auto ka = FeatureKey::parse(a);
        const auto kb = FeatureKey::parse(b);
        if (ka && kb) return *ka < *kb;
        if (ka != kb && (ka || kb)) return bool(ka);
        return a < b;
    });
    return names;
}

FeatureLabel feature_label(std::string_view name)
{
    struct Known
    {
        std::string_view code, short_label, series;
    };
    static constexpr Known known[] = {
        {"VIXCLS", "VIX", "VIX index (VIXCLS)"},
        {"FGI", "FGI", "Crypto Fear & Greed Index"},
        {"BTC", "BTC", "BTC log return"},
        {"BAMLH0A0HYM2", "BAMLH0A0HYM2", "HY OAS spread (BAMLH0A0HYM2)"},
        {"T10Y2Y", "T10Y2Y", "10Y-2Y Treasury spread (T10Y2Y)"},
        {"NASDAQCOM", "NASDAQCOM", "Nasdaq Composite (NASDAQCOM)"},
        {"DFF", "DFF", "Fed funds rate (DFF)"},
        {"DGS10", "DGS10", "US 10Y Treasury yield (DGS10)"},
        {"DTWEXBGS", "DTWEXBGS", "Trade-weighted USD (broad) (DTWEXBGS)"},
        {"median_er", "Median ER", "Median excess return"},
        {"cvar10", "CVaR10", "10% conditional value-at-risk"},
        {"top25_mean", "Top25 mean", "Mean of top-quartile returns"},
        {"sharpe", "Sharpe", "Sharpe ratio"},
    };
    auto lookup = [](std::string_view code) -> std::pair<std::string, std::string> {
        for (const auto& k : known) {
            if (k.code == code) return {std::string(k.short_label), std::string(k.series)};
        }
        return {std::string(code), std::string(code)};
    };
    if (auto key = FeatureKey::parse(name)) {
        auto [short_label, series] = lookup(key->base);
        const auto w = std::to_string(key->window);
        if (key->family == Family::ema) {
            return {short_label + " EMA" + w + "w", series, w + "-week exponential moving average."};
        }
        return {short_label + " RVol" + w + "w", series, w + "-week rolling volatility."};
    }
    auto [short_label, series] = lookup(name);
    return {short_label, series, "Endogenous target (current value)."};
}

std::size_t FeatureTensor::horizon_index(int horizon_days) const
{
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (horizons[i] == horizon_days) return i;
    }
    throw std::out_of_range("horizon not in tensor: " + std::to_string(horizon_days));
}

std::optional<std::size_t> FeatureTensor::feature_index(std::string_view name) const
{
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i] == name) return i;
    }
    return std::nullopt;
}

FeatureTensor align_tensors(const std::vector<HorizonTargets>& endogenous,
                            const std::map<std::string, WeeklySeries>& macro, std::vector<int> horizons,
                            std::span<const std::string_view> target_order)
{
    if (endogenous.size() != horizons.size()) {
        throw std::invalid_argument("align_tensors: one target map per horizon required");
    }
    struct Source
    {
        std::string label;
        const WeeklySeries* series;
    };
    std::vector<Source> sources;
    for (std::size_t h = 0; h < horizons.size(); ++h) {
        for (auto name : target_order) {
            auto it = endogenous[h].find(std::string(name));
            if (it == endogenous[h].end()) {
                throw std::runtime_error("align_tensors: horizon " + std::to_string(horizons[h]) +
                                         " lacks target " + std::string(name));
            }
            sources.push_back({std::string(name) + "@" + std::to_string(horizons[h]), &it->second});
        }
    }
    std::vector<std::string> feature_names;
    for (const auto& [name, s] : macro) feature_names.push_back(name);
    feature_names = registry_order(std::move(feature_names));
    for (const auto& name : feature_names) sources.push_back({name, &macro.at(name)});

    std::map<Date, std::size_t> counts;
    for (const auto& src : sources) {
        std::set<Date> seen;
        for (std::size_t i = 0; i < src.series->size(); ++i) {
            if (std::isfinite(src.series->values[i]) && seen.insert(src.series->week_mondays[i]).second) {
                ++counts[src.series->week_mondays[i]];
            }
        }
    }
    FeatureTensor t;
    t.horizons = std::move(horizons);
    for (auto name : target_order) t.targets.emplace_back(name);
    t.features = feature_names;
    for (const auto& [d, c] : counts) {
        if (c == sources.size()) t.grid.push_back(d);
    }
    if (t.grid.empty()) {
        std::vector<std::tuple<Date, Date, std::size_t, std::string>> spans;
        for (const auto& src : sources) {
            if (src.series->empty()) {
                spans.emplace_back(Date::max(), Date::min(), 0, src.label);
            } else {
                spans.emplace_back(src.series->week_mondays.front(), src.series->week_mondays.back(),
                                   src.series->size(), src.label);
            }
        }
        std::sort(spans.begin(), spans.end(), [](const auto& a, const auto& b) {
            return std::get<1>(a) - std::get<0>(a) < std::get<1>(b) - std::get<0>(b);
        });
        std::ostringstream msg;
        msg << "align_tensors: empty common grid; narrowest series:";
        for (std::size_t i = 0; i < std::min<std::size_t>(spans.size(), 5); ++i) {
            const auto& [first, last, n, label] = spans[i];
            msg << "\n  " << label << ": " << n << " weeks";
            if (n) msg << " [" << format_date(first) << " .. " << format_date(last) << "]";
        }
        throw std::runtime_error(msg.str());
    }

    std::map<Date, Eigen::Index> row_of;
    for (std::size_t i = 0; i < t.grid.size(); ++i) row_of[t.grid[i]] = Eigen::Index(i);
    auto fill = [&](Eigen::MatrixXd& m, Eigen::Index col, const WeeklySeries& s) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            auto it = row_of.find(s.week_mondays[i]);
            if (it != row_of.end()) m(it->second, col) = s.values[i];
        }
    };
    const auto T = t.periods();
    for (std::size_t h = 0; h < t.horizons.size(); ++h) {
        Eigen::MatrixXd y(T, Eigen::Index(t.targets.size()));
        for (std::size_t k = 0; k < t.targets.size(); ++k) fill(y, Eigen::Index(k), endogenous[h].at(t.targets[k]));
        Eigen::MatrixXd x(T, Eigen::Index(feature_names.size()));
        for (std::size_t j = 0; j < feature_names.size(); ++j) fill(x, Eigen::Index(j), macro.at(feature_names[j]));
        t.y_raw.push_back(std::move(y));
        t.x_raw.push_back(std::move(x));
    }
    return t;
}

void standardize_tensor(FeatureTensor& tensor, double eps)
{
    tensor.epsilon = eps;
    tensor.y_current.clear();
    tensor.x_macro.clear();
    for (std::size_t h = 0; h < tensor.horizons.size(); ++h) {
        tensor.y_current.push_back(causal_zscore_columns(tensor.y_raw[h], eps));
        tensor.x_macro.push_back(causal_zscore_columns(tensor.x_raw[h], eps));
    }
}

FutureTargets build_future_targets(const std::vector<Eigen::MatrixXd>& y_current, std::span<const int> horizons)
{
    if (y_current.size() != horizons.size()) throw std::invalid_argument("build_future_targets: horizon mismatch");
    int g_max = 0;
    for (int h : horizons) g_max = std::max(g_max, gap_weeks(h));
    const Eigen::Index T = y_current.empty() ? 0 : y_current.front().rows();
    if (T <= g_max) {
        throw std::runtime_error("insufficient history: " + std::to_string(T) + " weeks on the grid, gap needs more than " +
                                 std::to_string(g_max));
    }
    FutureTargets out;
    out.t_star = T - g_max;
    for (std::size_t h = 0; h < horizons.size(); ++h) {
        out.y_future.push_back(y_current[h].middleRows(gap_weeks(horizons[h]), out.t_star));
    }
    return out;
}

Eigen::MatrixXd reference_scales(const std::vector<Eigen::MatrixXd>& raw, Eigen::Index t_star, double eps)
{
    const Eigen::Index cols = raw.empty() ? 0 : raw.front().cols();
    Eigen::MatrixXd out(Eigen::Index(raw.size()), cols);
    for (std::size_t h = 0; h < raw.size(); ++h) {
        for (Eigen::Index c = 0; c < cols; ++c) out(Eigen::Index(h), c) = expanding_scale(raw[h].col(c), t_star, eps);
    }
    return out;
}

std::optional<TransformTag> endogenous_tag(const std::map<std::string, SeriesDecision>& decisions,
                                           const std::string& basket, const std::string& target,
                                           std::span<const int> horizons, std::vector<std::string>* log)
{
    std::vector<TransformTag> tags;
    for (int h : horizons) {
        const auto id = target + "@" + std::to_string(h);
        auto it = decisions.find(basket + ":" + id);
        if (it == decisions.end()) it = decisions.find(id);
        if (it != decisions.end()) tags.push_back(it->second.tag());
    }
    if (tags.empty()) return std::nullopt;
    if (tags.size() < horizons.size() && log) {
        log->push_back(basket + ": " + target + " has decisions for " + std::to_string(tags.size()) + " of " +
                       std::to_string(horizons.size()) + " horizons");
    }
    return resolve_global_tag(tags);
}

FeatureTensor build_feature_tensor(const std::string& basket, const std::map<int, HorizonTargets>& targets_by_horizon,
                                   const std::map<std::string, WeeklySeries>& macro_raw,
                                   const std::map<std::string, SeriesDecision>& decisions,
                                   std::vector<std::string>* log)
{
    std::vector<int> horizons;
    for (const auto& [h, targets] : targets_by_horizon) horizons.push_back(h);
    std::map<std::string, std::string> tag_log;

    std::vector<HorizonTargets> endogenous(horizons.size());
    for (auto name : metrics::target_names) {
        const std::string target(name);
        auto tag = endogenous_tag(decisions, basket, target, horizons, log);
        if (!tag) {
            if (log) log->push_back(basket + ": no stationarity decisions for " + target + ", treated as RW");
            tag = TransformTag::rw;
        }
        tag_log[target] = std::string(to_string(*tag));
        for (std::size_t h = 0; h < horizons.size(); ++h) {
            const auto& by_target = targets_by_horizon.at(horizons[h]);
            auto it = by_target.find(target);
            endogenous[h][target] = it == by_target.end()
                                        ? WeeklySeries{}
                                        : transform_weekly(it->second, *tag, SeriesRole::endogenous);
        }
    }

    std::map<std::string, WeeklySeries> macro_features;
    for (const auto& [base, series] : macro_raw) {
        TransformTag tag = TransformTag::rw;
        if (auto it = decisions.find(base); it != decisions.end()) {
            tag = it->second.tag();
        } else if (log) {
            log->push_back(basket + ": no stationarity decisions for " + base + ", treated as RW");
        }
        tag_log[base] = std::string(to_string(tag));
        auto features = ema_vol_features(base, transform_weekly(series, tag, SeriesRole::macro));
        macro_features.merge(features);
    }

    auto tensor = align_tensors(endogenous, macro_features, horizons, metrics::target_names);
    tensor.basket = basket;
    tensor.tags = std::move(tag_log);
    standardize_tensor(tensor);
    auto future = build_future_targets(tensor.y_current, tensor.horizons);
    tensor.y_future = std::move(future.y_future);
    tensor.t_star = future.t_star;
    tensor.gaps.clear();
    for (int h : tensor.horizons) tensor.gaps.push_back(gap_weeks(h));
    tensor.ref_scale_y = reference_scales(tensor.y_raw, tensor.t_star, tensor.epsilon);
    tensor.ref_scale_x = reference_scales(tensor.x_raw, tensor.t_star, tensor.epsilon);
    return tensor;
}

namespace {

void write_matrix(const fs::path& path, const std::vector<Date>& dates, const std::vector<std::string>& names,
                  const Eigen::MatrixXd& m)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "Date";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out << format_date(dates[std::size_t(r)]);
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << csv::format_number(m(r, c));
        out << '\n';
    }
}

Eigen::MatrixXd read_matrix(const fs::path& path, std::size_t cols)
{
    const auto t = csv::read(path);
    if (t.header.size() != cols + 1) throw std::runtime_error(path.string() + ": unexpected column count");
    Eigen::MatrixXd m(Eigen::Index(t.rows.size()), Eigen::Index(cols));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            auto v = c + 1 < t.rows[r].size() ? csv::parse_number(t.rows[r][c + 1]) : std::nullopt;
            if (!v) throw std::runtime_error(path.string() + ": missing value at row " + std::to_string(r + 1));
            m(Eigen::Index(r), Eigen::Index(c)) = *v;
        }
    }
    return m;
}

json matrix_json(const Eigen::MatrixXd& m)
{
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index cols)
{
    Eigen::MatrixXd m(Eigen::Index(j.size()), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(Eigen::Index(r), c) = j[r].at(std::size_t(c)).get<double>();
    }
    return m;
}

std::string horizon_file(int h, std::string_view what)
{
    return "h" + std::to_string(h) + "_" + std::string(what) + ".csv";
}

} // namespace

void write_tensor(const fs::path& dir, const FeatureTensor& t)
{
    fs::create_directories(dir);
    json meta;
    meta["basket"] = t.basket;
    meta["horizons"] = t.horizons;
    json grid = json::array();
    for (Date d : t.grid) grid.push_back(format_date(d));
    meta["grid"] = std::move(grid);
    meta["targets"] = t.targets;
    meta["features"] = t.features;
    meta["gaps"] = t.gaps;
    meta["t_star"] = t.t_star;
    meta["epsilon"] = t.epsilon;
    meta["ref_scale_y"] = matrix_json(t.ref_scale_y);
    meta["ref_scale_x"] = matrix_json(t.ref_scale_x);
    meta["tags"] = t.tags;
    {
        std::ofstream out(dir / "tensor_meta.json", std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write tensor metadata in " + dir.string());
        out << meta.dump(2) << '\n';
    }
    const std::vector<Date> train_dates(t.grid.begin(), t.grid.begin() + t.t_star);
    for (std::size_t h = 0; h < t.horizons.size(); ++h) {
        const int hd = t.horizons[h];
        write_matrix(dir / horizon_file(hd, "y_raw"), t.grid, t.targets, t.y_raw[h]);
        write_matrix(dir / horizon_file(hd, "x_raw"), t.grid, t.features, t.x_raw[h]);
        write_matrix(dir / horizon_file(hd, "y_current"), t.grid, t.targets, t.y_current[h]);
        write_matrix(dir / horizon_file(hd, "x_macro"), t.grid, t.features, t.x_macro[h]);
        write_matrix(dir / horizon_file(hd, "y_future"), train_dates, t.targets, t.y_future[h]);
    }
}

FeatureTensor read_tensor(const fs::path& dir)
{
    std::ifstream in(dir / "tensor_meta.json");
    if (!in) throw std::runtime_error("no tensor_meta.json in " + dir.string());
    const json meta = json::parse(in);
    FeatureTensor t;
    t.basket = meta.at("basket").get<std::string>();
    t.horizons = meta.at("horizons").get<std::vector<int>>();
    for (const auto& d : meta.at("grid")) {
        auto date = parse_date(d.get<std::string>());
        if (!date) throw std::runtime_error("tensor_meta.json: bad grid date");
        t.grid.push_back(*date);
    }
    t.targets = meta.at("targets").get<std::vector<std::string>>();
    t.features = meta.at("features").get<std::vector<std::string>>();
    t.gaps = meta.at("gaps").get<std::vector<int>>();
    t.t_star = meta.at("t_star").get<Eigen::Index>();
    t.epsilon = meta.at("epsilon").get<double>();
    t.ref_scale_y = matrix_from_json(meta.at("ref_scale_y"), Eigen::Index(t.targets.size()));
    t.ref_scale_x = matrix_from_json(meta.at("ref_scale_x"), Eigen::Index(t.features.size()));
    if (meta.contains("tags")) t.tags = meta.at("tags").get<std::map<std::string, std::string>>();
    for (int h : t.horizons) {
        t.y_raw.push_back(read_matrix(dir / horizon_file(h, "y_raw"), t.targets.size()));
        t.x_raw.push_back(read_matrix(dir / horizon_file(h, "x_raw"), t.features.size()));
        t.y_current.push_back(read_matrix(dir / horizon_file(h, "y_current"), t.targets.size()));
        t.x_macro.push_back(read_matrix(dir / horizon_file(h, "x_macro"), t.features.size()));
        t.y_future.push_back(read_matrix(dir / horizon_file(h, "y_future"), t.targets.size()));
    }
    return t;
}

} // namespace hodl::features
