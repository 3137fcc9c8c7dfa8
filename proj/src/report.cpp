#include <hodl/report.hpp>

#include <hodl/csv.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace hodl::report {

double bubble_area(double z)
{
    return std::min(std::max(bubble_min_area * (1 + 1.5 * z), bubble_min_area), bubble_max_area);
}

std::string_view to_string(Layout layout)
{
    return layout == Layout::risk_return ? "risk_return" : "upside";
}

namespace {

constexpr std::string_view palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                        "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct Axes
{
    std::string_view x_label, y_label, size_label;
};

Axes axes_of(Layout layout)
{
    if (layout == Layout::risk_return) return {"CVaR 1%", "Sharpe ratio", "P(loss > 10%)"};
    return {"Median excess return", "Top-quartile mean", "IQR"};
}

struct Values
{
    std::optional<double> x, y;
    double size;
};

Values values_of(const metrics::MetricSet& m, Layout layout)
{
    if (layout == Layout::risk_return) return {m.cvar, m.sharpe, m.p_sig_loss};
    return {m.median, m.top25_mean, m.iqr};
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(std::string_view s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::vector<double> ticks(double lo, double hi)
{
    const double span = hi - lo;
    const double raw = span / 5;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double f : {1.0, 2.0, 2.5, 5.0, 10.0}) {
        if (f * mag >= raw) {
            step = f * mag;
            break;
        }
    }
    std::vector<double> out;
    for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step) out.push_back(t);
    return out;
}

} // namespace

std::vector<BubblePoint> bubble_points(const std::vector<metrics::OverallRow>& rows, Layout layout)
{
    std::vector<BubblePoint> points;
    std::map<std::string, std::size_t> color_index;
    for (const auto& row : rows) {
        if (row.interval == metrics::pooled_label) continue;
        const auto v = values_of(row.metrics, layout);
        if (!v.x || !v.y || !std::isfinite(*v.x) || !std::isfinite(*v.y)) continue;
        auto [it, _] = color_index.emplace(row.basket, color_index.size());
        BubblePoint p;
        p.basket = row.basket;
        p.horizon = row.interval;
        p.x = *v.x;
        p.y = *v.y;
        p.size_value = v.size;
        p.color = std::string(palette[it->second % std::size(palette)]);
        points.push_back(std::move(p));
    }
    std::map<std::string, std::vector<BubblePoint*>> by_basket;
    for (auto& p : points) by_basket[p.basket].push_back(&p);
    for (auto& [_, group] : by_basket) {
        const double n = double(group.size());
        double mean = 0;
        for (auto* p : group) mean += p->size_value;
        mean /= n;
        double ss = 0;
        for (auto* p : group) ss += (p->size_value - mean) * (p->size_value - mean);
        const double sd = group.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
        for (auto* p : group) {
            p->z = sd > 0 ? (p->size_value - mean) / sd : 0.0;
            p->area = bubble_area(p->z);
        }
    }
    return points;
}

std::string render_bubble_svg(const std::vector<BubblePoint>& points, Layout layout)
{
    constexpr double W = 720, H = 520, left = 80, right = 160, top = 40, bottom = 70;
    const double pw = W - left - right, ph = H - top - bottom;
    const auto ax = axes_of(layout);
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!points.empty()) {
        x0 = x1 = points.front().x;
        y0 = y1 = points.front().y;
        for (const auto& p : points) {
            x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
        }
    }
    auto pad = [](double& lo, double& hi) {
        const double span = hi - lo;
        const double m = span > 0 ? span * 0.1 : std::max(std::abs(lo) * 0.1, 0.1);
        lo -= m;
        hi += m;
    };
    pad(x0, x1);
    pad(y0, y1);
    auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
        << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (double t : ticks(x0, x1)) {
        svg << "<line x1=\"" << fmt(sx(t)) << "\" y1=\"" << top + ph << "\" x2=\"" << fmt(sx(t)) << "\" y2=\""
            << top + ph + 5 << "\" stroke=\"#333\"/>";
        svg << "<text x=\"" << fmt(sx(t)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
            << csv::format_number(t) << "</text>\n";
    }
    for (double t : ticks(y0, y1)) {
        svg << "<line x1=\"" << left - 5 << "\" y1=\"" << fmt(sy(t)) << "\" x2=\"" << left << "\" y2=\""
            << fmt(sy(t)) << "\" stroke=\"#333\"/>";
        svg << "<text x=\"" << left - 8 << "\" y=\"" << fmt(sy(t) + 4) << "\" text-anchor=\"end\">"
            << csv::format_number(t) << "</text>\n";
    }
    svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 20 << "\" text-anchor=\"middle\">" << escape(ax.x_label)
        << "</text>\n";
    svg << "<text transform=\"translate(20," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << escape(ax.y_label) << "</text>\n";
    for (const auto& p : points) {
        const double r = std::sqrt(p.area / std::numbers::pi);
        svg << "<circle cx=\"" << fmt(sx(p.x)) << "\" cy=\"" << fmt(sy(p.y)) << "\" r=\"" << fmt(r) << "\" fill=\""
            << escape(p.color) << "\" fill-opacity=\"0.55\" stroke=\"" << escape(p.color) << "\"><title>"
            << escape(p.basket) << ' ' << escape(p.horizon) << "</title></circle>";
        svg << "<text x=\"" << fmt(sx(p.x)) << "\" y=\"" << fmt(sy(p.y) + 4) << "\" text-anchor=\"middle\" "
            << "font-size=\"9\">" << escape(p.horizon) << "</text>\n";
    }
    std::vector<std::pair<std::string, std::string>> legend;
    for (const auto& p : points) {
        if (std::none_of(legend.begin(), legend.end(), [&](const auto& l) { return l.first == p.basket; })) {
            legend.emplace_back(p.basket, p.color);
        }
    }
    double ly = top + 10;
    for (const auto& [basket, color] : legend) {
        svg << "<circle cx=\"" << W - right + 20 << "\" cy=\"" << ly << "\" r=\"6\" fill=\"" << escape(color)
            << "\"/><text x=\"" << W - right + 32 << "\" y=\"" << ly + 4 << "\">" << escape(basket) << "</text>\n";
        ly += 20;
    }
    svg << "<text x=\"" << W - right + 14 << "\" y=\"" << ly + 10 << "\" font-size=\"10\">Size: "
        << escape(ax.size_label) << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

void write_bubble_csv(const std::filesystem::path& path, const std::vector<BubblePoint>& points)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "basket,horizon,x,y,size_value,z,area,color\n";
    for (const auto& p : points) {
        out << p.basket << ',' << p.horizon << ',' << csv::format_number(p.x) << ',' << csv::format_number(p.y) << ','
            << csv::format_number(p.size_value) << ',' << csv::format_number(p.z) << ','
            << csv::format_number(p.area) << ',' << p.color << '\n';
    }
}

std::vector<BubblePoint> read_bubble_csv(const std::filesystem::path& path)
{
    const auto t = csv::read(path);
    std::vector<BubblePoint> out;
    for (const auto& row : t.rows) {
        if (row.size() < 8) throw std::runtime_error(path.string() + ": short row");
        auto num = [&](std::size_t i) {
            auto v = csv::parse_number(row[i]);
            if (!v) throw std::runtime_error(path.string() + ": bad number");
            return *v;
        };
        out.push_back({row[0], row[1], num(2), num(3), num(4), num(5), num(6), row[7]});
    }
    return out;
}

std::vector<std::filesystem::path> write_bubble_charts(const std::filesystem::path& dir,
                                                       const std::vector<metrics::OverallRow>& rows)
{
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (Layout layout : {Layout::risk_return, Layout::upside}) {
        const auto points = bubble_points(rows, layout);
        const auto stem = dir / ("bubble_" + std::string(to_string(layout)));
        auto csv_path = stem;
        csv_path += ".csv";
        auto svg_path = stem;
        svg_path += ".svg";
        write_bubble_csv(csv_path, points);
        std::ofstream svg(svg_path, std::ios::trunc);
        if (!svg) throw std::runtime_error("cannot write " + svg_path.string());
        svg << render_bubble_svg(points, layout);
        written.push_back(svg_path);
        written.push_back(csv_path);
    }
    return written;
}

} // namespace hodl::report
