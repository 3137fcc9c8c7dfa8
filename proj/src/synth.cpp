#include <hodl/synth.hpp>

#include <hodl/csv.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace hodl::synth {

namespace fs = std::filesystem;

double normal(CounterRng& rng)
{
    double u1 = rng.uniform01();
    while (u1 <= 0) u1 = rng.uniform01();
    const double u2 = rng.uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

panel::TokenPanel make_token(const TokenSpec& spec, Date start, std::size_t days, std::uint64_t seed)
{
    auto rng = CounterRng::stream(seed, {label_id("token"), label_id(spec.symbol)});
    panel::TokenPanel p;
    p.symbol = spec.symbol;
    double log_price = std::log(spec.start_price);
    for (std::size_t t = 0; t < days; ++t) {
        log_price += spec.drift + spec.vol * normal(rng);
        const double close = std::exp(log_price);
        const double up = std::abs(normal(rng)) * spec.vol * 0.5;
        const double down = std::abs(normal(rng)) * spec.vol * 0.5;
        p.dates.push_back(start + std::chrono::days{t});
        p.close.push_back(close);
        p.high.push_back(close * std::exp(up));
        p.low.push_back(close * std::exp(-down));
        p.volume.push_back(spec.volume * std::exp(0.3 * normal(rng)));
    }
    return p;
}

DailySeries make_macro(Date start, std::size_t days, double level, double vol, double reversion, std::uint64_t seed,
                       bool business_days)
{
    auto rng = CounterRng::stream(seed, {label_id("macro")});
    DailySeries s;
    double x = level;
    for (std::size_t t = 0; t < days; ++t) {
        const Date d = start + std::chrono::days{t};
        x += reversion * (level - x) + vol * normal(rng);
        if (business_days && iso_weekday(d) > 5) continue;
        s.dates.push_back(d);
        s.values.push_back(x);
    }
    return s;
}

namespace {

void write_series(const fs::path& path, const DailySeries& s)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "Date,Value\n";
    for (std::size_t i = 0; i < s.dates.size(); ++i) {
        out << format_date(s.dates[i]) << ',' << csv::format_number(s.values[i]) << '\n';
    }
}

} // namespace

void write_demo_dataset(const fs::path& dir, const DemoOptions& o)
{
    if (o.days < 400) throw std::invalid_argument("demo dataset needs at least 400 days");
    const Date start = o.end - std::chrono::days{o.days - 1};
    fs::create_directories(dir / "tokens");
    fs::create_directories(dir / "macro");

    struct Listing
    {
        TokenSpec spec;
        std::size_t offset;
    };
    const Listing listings[] = {
        {{"BTC", 250, 0.0012, 0.035, 2e10}, 0},
        {{"ETH", 1.0, 0.0014, 0.048, 8e9}, o.days / 6},
        {{"SOL", 2.0, 0.0010, 0.060, 1e9}, o.days / 2},
        {{"DOGE", 0.002, 0.0008, 0.065, 5e8}, o.days / 5},
        {{"USDT", 1.0, 0.0, 0.001, 3e10}, o.days / 4},
        {{"TINY", 0.5, 0.0, 0.05, 1e3}, o.days / 3},
    };
    for (const auto& l : listings) {
        auto p = make_token(l.spec, start + std::chrono::days{l.offset}, o.days - l.offset, o.seed);
        if (l.spec.symbol == "USDT") {
            for (auto* v : {&p.close, &p.high, &p.low}) {
                for (auto& x : *v) x = 1.0 + (x - 1.0) * 0.05;
            }
        }
        panel::write_token_csv(dir / "tokens" / (l.spec.symbol + ".csv"), p);
    }

    struct Macro
    {
        const char* name;
        double level, vol, reversion;
    };
    const Macro macros[] = {
        {"VIXCLS", 20, 1.2, 0.04},  {"DFF", 2.0, 0.02, 0.002},  {"DGS10", 3.0, 0.05, 0.003},
        {"T10Y2Y", 0.8, 0.04, 0.004}, {"NASDAQCOM", 9000, 90, 0.0},
    };
    std::uint64_t k = 0;
    for (const auto& m : macros) {
        write_series(dir / "macro" / (std::string(m.name) + ".csv"),
                     make_macro(start, o.days, m.level, m.vol, m.reversion, o.seed + (++k)));
    }
    auto fgi = make_macro(start, o.days, 50, 6, 0.08, o.seed + 100, false);
    for (auto& v : fgi.values) v = std::clamp(std::round(v), 0.0, 100.0);
    write_series(dir / "fgi.csv", fgi);
    auto rf = make_macro(start, o.days, 2.0, 0.03, 0.01, o.seed + 200);
    for (auto& v : rf.values) v = std::max(0.0, v);
    write_series(dir / "riskfree.csv", rf);

    {
        std::ofstream out(dir / "stationarity.csv");
        out << "series,spec,dfgls_p,kpss_p,za_p\n"
               "BTC,c,0.000,0.100,0.000\nBTC,ct,0.000,0.100,0.001\n"
               "FGI,c,0.001,0.078,0.002\nFGI,ct,0.000,0.098,0.005\n"
               "BAMLH0A0HYM2,c,0.014,0.076,0.584\nBAMLH0A0HYM2,ct,0.092,0.023,0.556\n"
               "DFF,c,0.260,0.010,0.024\nDFF,ct,0.422,0.010,0.697\n"
               "DGS10,c,0.469,0.010,0.691\nDGS10,ct,0.859,0.010,0.877\n"
               "DTWEXBGS,c,0.625,0.010,0.323\nDTWEXBGS,ct,0.232,0.022,0.421\n"
               "NASDAQCOM,c,0.828,0.010,0.232\nNASDAQCOM,ct,0.240,0.011,0.327\n"
               "T10Y2Y,c,0.266,0.010,0.404\nT10Y2Y,ct,0.742,0.010,0.893\n"
               "VIXCLS,c,0.000,0.100,0.000\nVIXCLS,ct,0.000,0.010,0.001\n";
    }

    nlohmann::ordered_json run;
    run["data_dir"] = ".";
    run["output_dir"] = "out";
    run["baskets"] = {{"ALL", nlohmann::ordered_json::array()}, {"BTC", {"BTC"}}, {"ETH", {"ETH"}}};
    run["n"] = o.n;
    run["fee"] = 0.001;
    run["seeds"] = {{"simulate", 42}, {"select", 7}, {"irf", 9}};
    run["selection"] = {{"bootstrap", 200}};
    run["irf"] = {{"bootstrap", 200}, {"lambda", 1.0}};
    std::ofstream(dir / "run.json") << run.dump(2) << '\n';
}

} // namespace hodl::synth
