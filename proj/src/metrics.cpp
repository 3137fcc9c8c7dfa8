#include <hodl/metrics.hpp>

#include <hodl/csv.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace hodl::metrics {

std::string_view to_string(Flavor f)
{
    return f == Flavor::overall ? "overall" : "weekly";
}

double quantile_sorted(std::span<const double> sorted, double p)
{
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    const double pos = p * double(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - double(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

MetricSet compute_metrics(std::span<const double> sample, double alpha, Flavor flavor)
{
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    return compute_metrics_sorted(sorted, alpha, flavor);
}

MetricSet compute_metrics_sorted(std::span<const double> x, double alpha, Flavor flavor)
{
    if (x.empty()) throw std::invalid_argument("metrics need at least one observation");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");

    MetricSet m;
    m.n = x.size();
    m.alpha = alpha;
    m.flavor = flavor;
    const double n = double(m.n);

    double sum = 0.0;
    for (double v : x) sum += v;
    m.mean = x.front() == x.back() ? x.front() : sum / n;

    double s2 = 0.0, s3 = 0.0, s4 = 0.0;
    for (double v : x) {
        const double d = v - m.mean;
        const double d2 = d * d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
    }
    if (m.n >= 2) {
        m.std = std::sqrt(s2 / (n - 1.0));
        if (*m.std > 0.0) m.sharpe = m.mean / *m.std;
    }

    std::size_t n_neg = 0;
    double neg_sum = 0.0;
    for (double v : x) {
        if (v < 0.0) {
            ++n_neg;
            neg_sum += v;
        }
    }
    if (n_neg >= 2) {
        const double neg_mean = x.front() == x[n_neg - 1] ? x.front() : neg_sum / double(n_neg);
        double neg_ss = 0.0;
        for (double v : x) {
            if (v < 0.0) neg_ss += (v - neg_mean) * (v - neg_mean);
        }
        const double neg_sd = std::sqrt(neg_ss / double(n_neg - 1));
        if (neg_sd > 0.0) m.sortino = m.mean / neg_sd;
    }

    m.median = quantile_sorted(x, 0.5);
    const double q25 = quantile_sorted(x, 0.25);
    m.q75 = quantile_sorted(x, 0.75);
    m.iqr = m.q75 - q25;

    const double qa = quantile_sorted(x, alpha);
    m.var = std::max(0.0, -qa);
    // Tail mean as qa plus the mean shortfall below it, so CVaR >= VaR survives rounding.
    double shortfall = 0.0;
    std::size_t tail_n = 0;
    for (double v : x) {
        if (v > qa) break;
        shortfall += v - qa;
        ++tail_n;
    }
    m.cvar = std::max(0.0, -(qa + shortfall / double(tail_n)));

    std::size_t profit = 0, sig_loss = 0, top_n = 0;
    double top_sum = 0.0;
    for (double v : x) {
        profit += v > 0.0 ? 1 : 0;
        sig_loss += v < significant_loss ? 1 : 0;
        if (v >= m.q75) {
            ++top_n;
            top_sum += v;
        }
    }
    m.p_profit = double(profit) / n;
    m.p_sig_loss = double(sig_loss) / n;
    m.top25_mean = top_sum / double(top_n);
    m.top25_prop = double(top_n) / n;

    if (flavor == Flavor::overall && m.n >= 4 && s2 > 0.0) {
        m.skew = n * std::sqrt(n - 1.0) / (n - 2.0) * s3 / std::pow(s2, 1.5);
        m.kurt = n * (n + 1.0) * (n - 1.0) * s4 / ((n - 2.0) * (n - 3.0) * s2 * s2) -
                 3.0 * (n - 1.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0));
    }
    return m;
}

std::vector<OverallRow> aggregate_overall(const std::vector<const sim::EpisodeBatch*>& batches)
{
    std::vector<OverallRow> rows;
    std::vector<std::string> basket_order;
    std::map<std::string, std::vector<double>> pooled;
    for (const auto* b : batches) {
        if (b->size() == 0) continue;
        rows.push_back({b->basket, b->interval.label(),
                        compute_metrics(b->excess_return, overall_alpha, Flavor::overall)});
        auto [it, inserted] = pooled.try_emplace(b->basket);
        if (inserted) basket_order.push_back(b->basket);
        it->second.insert(it->second.end(), b->excess_return.begin(), b->excess_return.end());
    }
    for (const auto& basket : basket_order) {
        rows.push_back({basket, std::string(pooled_label),
                        compute_metrics(pooled[basket], overall_alpha, Flavor::overall)});
    }
    return rows;
}

WeeklyMetricPanel aggregate_weekly(const sim::EpisodeBatch& batch)
{
    std::map<Date, std::vector<double>> groups;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        groups[week_monday(batch.sell_date(i))].push_back(batch.excess_return[i]);
    }
    WeeklyMetricPanel panel;
    panel.basket = batch.basket;
    panel.interval = batch.interval;
    for (auto& [monday, values] : groups) {
        panel.week_mondays.push_back(monday);
        panel.metrics.push_back(compute_metrics(values, weekly_alpha, Flavor::weekly));
    }
    return panel;
}

std::map<std::string, WeeklySeries> endogenous_targets(const WeeklyMetricPanel& panel)
{
    std::map<std::string, WeeklySeries> out;
    for (auto name : target_names) out[std::string(name)];
    auto add = [&](std::string_view name, Date d, std::optional<double> v) {
        if (!v || !std::isfinite(*v)) return;
        auto& s = out[std::string(name)];
        s.week_mondays.push_back(d);
        s.values.push_back(*v);
    };
    for (std::size_t i = 0; i < panel.metrics.size(); ++i) {
        const auto& m = panel.metrics[i];
        const Date d = panel.week_mondays[i];
        add(target_names[0], d, m.median);
        add(target_names[1], d, m.cvar);
        add(target_names[2], d, m.top25_mean);
        add(target_names[3], d, m.sharpe);
    }
    return out;
}

namespace {

constexpr const char* metric_header =
    "n,mean,median,std,iqr,sharpe,sortino,var,cvar,alpha,p_profit,p_sig_loss,q75,top25_mean,top25_prop";

void write_metric_cells(std::ostream& out, const MetricSet& m)
{
    using csv::format_number;
    using csv::format_optional;
    out << m.n << ',' << format_number(m.mean) << ',' << format_number(m.median) << ','
        << format_optional(m.std) << ',' << format_number(m.iqr) << ',' << format_optional(m.sharpe) << ','
        << format_optional(m.sortino) << ',' << format_number(m.var) << ',' << format_number(m.cvar) << ','
        << format_number(m.alpha) << ',' << format_number(m.p_profit) << ',' << format_number(m.p_sig_loss)
        << ',' << format_number(m.q75) << ',' << format_number(m.top25_mean) << ','
        << format_number(m.top25_prop);
}

nlohmann::ordered_json optional_json(const std::optional<double>& v)
{
    if (v && std::isfinite(*v)) return *v;
    return nullptr;
}

nlohmann::ordered_json metric_json(const MetricSet& m)
{
    nlohmann::ordered_json j;
    j["n"] = m.n;
    j["mean"] = m.mean;
    j["median"] = m.median;
    j["std"] = optional_json(m.std);
    j["iqr"] = m.iqr;
    j["sharpe"] = optional_json(m.sharpe);
    j["sortino"] = optional_json(m.sortino);
    j["var"] = m.var;
    j["cvar"] = m.cvar;
    j["alpha"] = m.alpha;
    j["p_profit"] = m.p_profit;
    j["p_sig_loss"] = m.p_sig_loss;
    j["q75"] = m.q75;
    j["top25_mean"] = m.top25_mean;
    j["top25_prop"] = m.top25_prop;
    if (m.flavor == Flavor::overall) {
        j["skew"] = optional_json(m.skew);
        j["kurt"] = optional_json(m.kurt);
    }
    j["flavor"] = std::string(to_string(m.flavor));
    return j;
}

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

} // namespace

void write_overall_csv(const std::filesystem::path& path, const std::vector<OverallRow>& rows)
{
    auto out = open_out(path);
    out << "basket,interval," << metric_header << ",skew,kurt\n";
    for (const auto& r : rows) {
        out << r.basket << ',' << r.interval << ',';
        write_metric_cells(out, r.metrics);
        out << ',' << csv::format_optional(r.metrics.skew) << ',' << csv::format_optional(r.metrics.kurt)
            << '\n';
    }
}

void write_overall_json(const std::filesystem::path& path, const std::vector<OverallRow>& rows)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json row;
        row["basket"] = r.basket;
        row["interval"] = r.interval;
        row["metrics"] = metric_json(r.metrics);
        j.push_back(std::move(row));
    }
    open_out(path) << j.dump(2) << '\n';
}

void write_weekly_csv(const std::filesystem::path& path, const std::vector<WeeklyMetricPanel>& panels)
{
    auto out = open_out(path);
    out << "basket,interval,week," << metric_header << '\n';
    for (const auto& p : panels) {
        for (std::size_t i = 0; i < p.metrics.size(); ++i) {
            out << p.basket << ',' << p.interval.label() << ',' << format_date(p.week_mondays[i]) << ',';
            write_metric_cells(out, p.metrics[i]);
            out << '\n';
        }
    }
}

void write_weekly_json(const std::filesystem::path& path, const std::vector<WeeklyMetricPanel>& panels)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& p : panels) {
        for (std::size_t i = 0; i < p.metrics.size(); ++i) {
            nlohmann::ordered_json row;
            row["basket"] = p.basket;
            row["interval"] = p.interval.label();
            row["week"] = format_date(p.week_mondays[i]);
            row["metrics"] = metric_json(p.metrics[i]);
            j.push_back(std::move(row));
        }
    }
    open_out(path) << j.dump(2) << '\n';
}

std::vector<std::string> key_statistics_columns()
{
    return {"Basket", "Horizon", "mean", "median", "std", "sharpe", "sortino",
            "var_1", "cvar_1", "p_sig_loss", "q75", "top25_mean"};
}

void write_key_statistics_csv(const std::filesystem::path& path, const std::vector<OverallRow>& rows)
{
    auto out = open_out(path);
    const auto cols = key_statistics_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    using csv::format_number;
    using csv::format_optional;
    for (const auto& r : rows) {
        if (r.interval == pooled_label) continue;
        const auto& m = r.metrics;
        out << r.basket << ',' << r.interval << ',' << format_number(m.mean) << ',' << format_number(m.median)
            << ',' << format_optional(m.std) << ',' << format_optional(m.sharpe) << ','
            << format_optional(m.sortino) << ',' << format_number(m.var) << ',' << format_number(m.cvar) << ','
            << format_number(m.p_sig_loss) << ',' << format_number(m.q75) << ',' << format_number(m.top25_mean)
            << '\n';
    }
}

void write_weekly_targets_csv(const std::filesystem::path& path, const std::vector<WeeklyMetricPanel>& panels)
{
    auto out = open_out(path);
    out << "basket,horizon,week";
    for (auto name : target_names) out << ',' << name;
    out << '\n';
    for (const auto& p : panels) {
        for (std::size_t i = 0; i < p.metrics.size(); ++i) {
            const auto& m = p.metrics[i];
            out << p.basket << ',' << p.interval.upper << ',' << format_date(p.week_mondays[i]) << ','
                << csv::format_number(m.median) << ',' << csv::format_number(m.cvar) << ','
                << csv::format_number(m.top25_mean) << ',' << csv::format_optional(m.sharpe) << '\n';
        }
    }
}

TargetTable read_weekly_targets_csv(const std::filesystem::path& path)
{
    const auto t = csv::read(path);
    const auto c_basket = t.column("basket");
    const auto c_h = t.column("horizon");
    const auto c_week = t.column("week");
    if (!c_basket || !c_h || !c_week) throw std::runtime_error(path.string() + ": missing basket/horizon/week");
    std::vector<std::pair<std::string, std::size_t>> cols;
    for (auto name : target_names) {
        auto c = t.column(name);
        if (!c) throw std::runtime_error(path.string() + ": missing column " + std::string(name));
        cols.emplace_back(std::string(name), *c);
    }
    TargetTable out;
    for (const auto& row : t.rows) {
        const auto d = parse_date(row.at(*c_week));
        const auto h = csv::parse_number(row.at(*c_h));
        if (!d || !h) continue;
        auto& per_target = out[row.at(*c_basket)][static_cast<int>(*h)];
        for (const auto& [name, c] : cols) {
            auto& s = per_target[name];
            if (auto v = c < row.size() ? csv::parse_number(row[c]) : std::nullopt) {
                s.week_mondays.push_back(*d);
                s.values.push_back(*v);
            }
        }
    }
    return out;
}

std::vector<OverallRow> read_overall_csv(const std::filesystem::path& path)
{
    const auto t = csv::read(path);
    auto col = [&](std::string_view name) {
        auto c = t.column(name);
        if (!c) throw std::runtime_error(path.string() + ": missing column " + std::string(name));
        return *c;
    };
    const std::size_t cb = col("basket"), ci = col("interval"), cn = col("n"), cmean = col("mean"),
                      cmed = col("median"), cstd = col("std"), ciqr = col("iqr"), csh = col("sharpe"),
                      cso = col("sortino"), cvar = col("var"), ccvar = col("cvar"), calpha = col("alpha"),
                      cpp = col("p_profit"), cpsl = col("p_sig_loss"), cq75 = col("q75"),
                      ctop = col("top25_mean"), ctopp = col("top25_prop"), csk = col("skew"),
                      cku = col("kurt");
    std::vector<OverallRow> rows;
    for (const auto& r : t.rows) {
        auto num = [&](std::size_t c) { return c < r.size() ? csv::parse_number(r[c]) : std::nullopt; };
        OverallRow row;
        row.basket = r.at(cb);
        row.interval = r.at(ci);
        auto& m = row.metrics;
        m.n = static_cast<std::size_t>(num(cn).value_or(0));
        m.mean = num(cmean).value_or(NAN);
        m.median = num(cmed).value_or(NAN);
        m.std = num(cstd);
        m.iqr = num(ciqr).value_or(NAN);
        m.sharpe = num(csh);
        m.sortino = num(cso);
        m.var = num(cvar).value_or(NAN);
        m.cvar = num(ccvar).value_or(NAN);
        m.alpha = num(calpha).value_or(overall_alpha);
        m.p_profit = num(cpp).value_or(NAN);
        m.p_sig_loss = num(cpsl).value_or(NAN);
        m.q75 = num(cq75).value_or(NAN);
        m.top25_mean = num(ctop).value_or(NAN);
        m.top25_prop = num(ctopp).value_or(NAN);
        m.skew = num(csk);
        m.kurt = num(cku);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace hodl::metrics
