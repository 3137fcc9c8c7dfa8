#include "support.hpp"

#include <hodl/panel.hpp>

#include <doctest.h>

#include <cmath>

using namespace hodl;
using namespace hodl::panel;
using hodl::testing::flat_panel;
using hodl::testing::TempDir;
using hodl::testing::write_text;
using hodl::testing::ymd;

namespace {

const Date old_start = ymd(2021, 1, 1);
constexpr std::size_t full_span = 1700; // through 2025-08-27

std::string token_csv(Date start, std::size_t days, double price)
{
    std::string s = "Date,High,Low,Close,Volume\n";
    for (std::size_t i = 0; i < days; ++i) {
        s += format_date(start + std::chrono::days{i}) + "," + std::to_string(price * 1.01) + "," +
             std::to_string(price * 0.99) + "," + std::to_string(price) + ",1000000\n";
    }
    return s;
}

} // namespace

TEST_CASE("load_panel_set keeps every parseable token in symbol order")
{
    TempDir dir("panel_load");
    write_text(dir / "ETH.csv", token_csv(old_start, 10, 50));
    write_text(dir / "BTC.csv", token_csv(old_start, 10, 100));
    write_text(dir / "SOL.csv", token_csv(old_start, 10, 5));
    const auto set = load_panel_set(dir.path());
    REQUIRE(set.size() == 3);
    CHECK(set.panels[0].symbol == "BTC");
    CHECK(set.panels[2].symbol == "SOL");
    CHECK(set.warnings.empty());
}

TEST_CASE("empty directory gives an empty set and a warning")
{
    TempDir dir("panel_empty");
    const auto set = load_panel_set(dir.path());
    CHECK(set.size() == 0);
    CHECK(set.warnings.size() == 1);
    CHECK_THROWS_AS(load_panel_set(dir / "missing"), std::runtime_error);
}

TEST_CASE("a non-numeric close is flagged and later trimmed")
{
    TempDir dir("panel_flag");
    write_text(dir / "X.csv", "Date,Close,High,Low,Volume\n"
                              "2021-01-01,abc,2,1,10\n"
                              "2021-01-02,1.5,2,1,10\n"
                              "2021-01-04,1.6,2,1,10\n");
    std::vector<std::string> warnings;
    const auto p = load_token_csv(dir / "X.csv", "X", warnings);
    CHECK(p.flagged_rows == 1);
    CHECK(warnings.size() == 1);
    REQUIRE(p.size() == 4);
    CHECK(std::isnan(p.close[0]));
    CHECK(std::isnan(p.close[2]));
    CHECK(p.close[3] == 1.6);
}

TEST_CASE("stablecoin detection")
{
    CleaningRules rules;
    auto make = [](std::vector<double> closes) {
        TokenPanel p;
        p.symbol = "S";
        p.close = std::move(closes);
        return p;
    };
    // mean 1.001, sample std 0.01
    CHECK(detect_stablecoin(make({0.991, 1.011, 1.001, 0.991, 1.011, 1.001}), rules));
    CHECK_FALSE(detect_stablecoin(make({0.49, 0.51, 0.50}), rules));
    CHECK_FALSE(detect_stablecoin(make({0.97, 1.07, 0.97, 1.07}), rules));
    std::vector<std::string> warnings;
    CHECK_FALSE(detect_stablecoin(make({1.0}), rules, &warnings));
    CHECK(warnings.size() == 1);
}

TEST_CASE("cleaning rules record the first matching reason")
{
    PanelSet set;
    set.panels.push_back(flat_panel("LATE", ymd(2024, 3, 1), 600));
    set.panels.push_back(flat_panel("USDX", old_start, full_span, 1.0));
    set.panels.push_back(flat_panel("THIN", old_start, full_span, 10.0, 50000));
    set.panels.push_back(flat_panel("STALE", old_start, 1000));
    auto zero = flat_panel("ZERO", old_start, full_span);
    for (std::size_t i = 100; i < 112; ++i) zero.volume[i] = 0.0;
    set.panels.push_back(zero);
    auto gappy = flat_panel("GAP", old_start, full_span);
    gappy.low[500] = std::nan("");
    set.panels.push_back(gappy);
    auto good = flat_panel("GOOD", old_start, full_span);
    good.close[0] = std::nan("");
    good.close[1] = std::nan("");
    set.panels.push_back(good);

    const auto r = apply_cleaning_rules(set);
    REQUIRE(r.retained.size() == 1);
    CHECK(r.retained[0].symbol == "GOOD");
    CHECK(r.retained[0].dates.front() == old_start + std::chrono::days{2});
    CHECK(r.excluded.at("LATE") == ExclusionReason::first_date_cutoff);
    CHECK(r.excluded.at("USDX") == ExclusionReason::stablecoin);
    CHECK(r.excluded.at("THIN") == ExclusionReason::low_volume);
    CHECK(r.excluded.at("STALE") == ExclusionReason::stale_latest_date);
    CHECK(r.excluded.at("ZERO") == ExclusionReason::quality_screen);
    CHECK(r.excluded.at("GAP") == ExclusionReason::missing_values);
    CHECK(to_string(ExclusionReason::quality_screen) == "quality_screen");

    SUBCASE("idempotent")
    {
        PanelSet again;
        again.panels = r.retained;
        const auto r2 = apply_cleaning_rules(again);
        REQUIRE(r2.retained.size() == 1);
        CHECK(r2.excluded.empty());
        CHECK(r2.retained[0].dates == r.retained[0].dates);
        CHECK(r2.retained[0].close == r.retained[0].close);
    }
}

TEST_CASE("cleaning rule validation")
{
    CleaningRules bad;
    bad.stablecoin_close_lo = 1.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CleaningRules neg;
    neg.min_avg_volume_usd = -1;
    CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
}

TEST_CASE("weekly macro alignment takes Friday, else Thursday")
{
    // 2024-01-01 is a Monday.
    DailySeries d;
    d.dates = {ymd(2024, 1, 4), ymd(2024, 1, 5), ymd(2024, 1, 11), ymd(2024, 1, 16)};
    d.values = {4.0, 4.20, 4.10, 3.9};
    const auto w = weekly_align_macro(d);
    REQUIRE(w.size() == 2);
    CHECK(w.week_mondays[0] == ymd(2024, 1, 1));
    CHECK(w.values[0] == 4.20);
    CHECK(w.week_mondays[1] == ymd(2024, 1, 8));
    CHECK(w.values[1] == 4.10);
    for (auto m : w.week_mondays) CHECK(iso_weekday(m) == 1);
    CHECK(weekly_align_macro({}).empty());
}

TEST_CASE("weekly fear-and-greed mean")
{
    DailySeries d;
    for (unsigned i = 0; i < 7; ++i) {
        d.dates.push_back(ymd(2024, 1, 1 + i));
        d.values.push_back(50);
    }
    d.dates.push_back(ymd(2024, 1, 9));
    d.values.push_back(40);
    d.dates.push_back(ymd(2024, 1, 14));
    d.values.push_back(60);
    d.dates.push_back(ymd(2024, 1, 17));
    d.values.push_back(12);
    d.dates.push_back(ymd(2024, 1, 18));
    d.values.push_back(17);
    d.dates.push_back(ymd(2024, 1, 21));
    d.values.push_back(95);
    const auto w = weekly_fgi_mean(d);
    REQUIRE(w.size() == 3);
    CHECK(w.values[0] == 50);
    CHECK(w.values[1] == 50);
    CHECK(w.values[2] == doctest::Approx(124.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("weekly BTC log return")
{
    SUBCASE("constant price")
    {
        const auto p = flat_panel("BTC", ymd(2024, 1, 1), 35);
        const auto r = btc_weekly_log_return(p);
        REQUIRE(r.size() == 4);
        for (double v : r.values) CHECK(v == 0.0);
    }
    SUBCASE("doubling each week, missing Sunday uses Saturday")
    {
        auto p = flat_panel("BTC", ymd(2024, 1, 1), 21);
        for (std::size_t i = 0; i < 21; ++i) p.close[i] = std::pow(2.0, double(i / 7));
        p.close[13] = std::nan("");
        p.close[12] = 3.0;
        const auto r = btc_weekly_log_return(p);
        REQUIRE(r.size() == 2);
        CHECK(r.week_mondays[0] == ymd(2024, 1, 8));
        CHECK(r.values[0] == doctest::Approx(std::log(3.0)).epsilon(1e-15));
        CHECK(r.values[1] == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-15));
        CHECK(r.values[0] + r.values[1] == doctest::Approx(std::log(4.0)).epsilon(1e-15));
    }
    SUBCASE("nonpositive close is fatal")
    {
        auto p = flat_panel("BTC", ymd(2024, 1, 1), 14);
        p.close[3] = 0.0;
        CHECK_THROWS_AS(btc_weekly_log_return(p), std::domain_error);
    }
}

TEST_CASE("weekly table round trip")
{
    TempDir dir("panel_weekly");
    WeeklySeries a{{ymd(2024, 1, 1), ymd(2024, 1, 8)}, {1.5, 2.5}};
    WeeklySeries b{{ymd(2024, 1, 8)}, {-0.25}};
    write_weekly_table(dir / "w.csv", {{"A", a}, {"B", b}});
    const auto back = read_weekly_table(dir / "w.csv");
    CHECK(back.at("A").values == a.values);
    CHECK(back.at("B").week_mondays == b.week_mondays);
    CHECK(back.at("B").values == b.values);
}
