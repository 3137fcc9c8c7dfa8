#include "support.hpp"

#include <hodl/features.hpp>
#include <hodl/metrics.hpp>
#include <hodl/stationarity.hpp>
#include <hodl/transforms.hpp>

#include <doctest.h>

#include <cmath>
#include <set>

using namespace hodl;
using namespace hodl::features;
using hodl::testing::TempDir;
using hodl::testing::ymd;

namespace {

struct TableCell
{
    const char* series;
    double dfgls, kpss, za;
    UnitRootOutcome expected;
};

// Unit-root p-values for nine macro series, constant-only then with trend.
const TableCell unit_root_table[] = {
    {"BTC c", 0.000, 0.100, 0.000, UnitRootOutcome::stationary},
    {"BTC ct", 0.000, 0.100, 0.001, UnitRootOutcome::stationary},
    {"FGI c", 0.001, 0.078, 0.002, UnitRootOutcome::stationary},
    {"FGI ct", 0.000, 0.098, 0.005, UnitRootOutcome::stationary},
    {"HY c", 0.014, 0.076, 0.584, UnitRootOutcome::ambiguous},
    {"HY ct", 0.092, 0.023, 0.556, UnitRootOutcome::unit_root},
    {"DFF c", 0.260, 0.010, 0.024, UnitRootOutcome::ambiguous},
    {"DFF ct", 0.422, 0.010, 0.697, UnitRootOutcome::unit_root},
    {"DGS10 c", 0.469, 0.010, 0.691, UnitRootOutcome::unit_root},
    {"DGS10 ct", 0.859, 0.010, 0.877, UnitRootOutcome::unit_root},
    {"USD c", 0.625, 0.010, 0.323, UnitRootOutcome::unit_root},
    {"USD ct", 0.232, 0.022, 0.421, UnitRootOutcome::unit_root},
    {"NASDAQ c", 0.828, 0.010, 0.232, UnitRootOutcome::unit_root},
    {"NASDAQ ct", 0.240, 0.011, 0.327, UnitRootOutcome::unit_root},
    {"T10Y2Y c", 0.266, 0.010, 0.404, UnitRootOutcome::unit_root},
    {"T10Y2Y ct", 0.742, 0.010, 0.893, UnitRootOutcome::unit_root},
    {"VIX c", 0.000, 0.100, 0.000, UnitRootOutcome::stationary},
    {"VIX ct", 0.000, 0.010, 0.001, UnitRootOutcome::ambiguous},
};

Vector<double> random_walk(std::size_t n, std::uint64_t seed)
{
    auto rng = CounterRng::stream(seed, {});
    Vector<double> x(static_cast<Eigen::Index>(n));
    double level = 0;
    for (auto& v : x) {
        level += rng.uniform01() - 0.5;
        v = level;
    }
    return x;
}

WeeklySeries weekly(Date first, const std::vector<double>& values)
{
    WeeklySeries s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        s.week_mondays.push_back(first + std::chrono::days{7 * i});
        s.values.push_back(values[i]);
    }
    return s;
}

} // namespace

TEST_CASE("unit-root decisions reproduce the published table")
{
    for (const auto& cell : unit_root_table) {
        INFO(cell.series);
        CHECK(decide_stationarity(cell.dfgls, cell.kpss, cell.za) == cell.expected);
    }
    CHECK_THROWS_AS(decide_stationarity(1.2, 0.1, 0.1), std::invalid_argument);
}

TEST_CASE("transform tags")
{
    using U = UnitRootOutcome;
    CHECK(tag_from_decisions(U::stationary, U::stationary) == TransformTag::level);
    CHECK(tag_from_decisions(U::ambiguous, U::stationary) == TransformTag::trend);
    CHECK(tag_from_decisions(U::unit_root, U::unit_root) == TransformTag::rw);
    using T = TransformTag;
    const std::vector<T> a{T::level, T::level, T::level, T::level, T::rw, T::rw};
    const std::vector<T> b{T::level, T::level, T::level, T::rw, T::rw, T::rw};
    const std::vector<T> c{T::trend, T::trend, T::trend, T::level, T::level, T::level};
    CHECK(resolve_global_tag(a) == T::level);
    CHECK(resolve_global_tag(b) == T::rw);
    CHECK(resolve_global_tag(c) == T::trend);

    std::vector<StationarityRecord> recs{{"VIXCLS", "c", 0.0, 0.1, 0.0}, {"VIXCLS", "ct", 0.0, 0.01, 0.001},
                                         {"DFF", "c", 0.26, 0.01, 0.024}, {"DFF", "ct", 0.422, 0.01, 0.697}};
    const auto d = decide_all(recs);
    CHECK(d.at("VIXCLS").tag() == T::level);
    CHECK(d.at("DFF").tag() == T::rw);
}

TEST_CASE("fractional differencing weights")
{
    const auto w = frac_diff_weights(0.5, 20);
    REQUIRE(w.size() == 21);
    CHECK(w(0) == 1.0);
    CHECK(w(1) == -0.5);
    CHECK(w(2) == -0.125);
    CHECK(w(3) == -0.0625);
    for (int k = 0; k <= 20; ++k) {
        // (-1)^k C(0.5, k)
        const double binom = std::tgamma(1.5) / (std::tgamma(double(k) + 1.0) * std::tgamma(1.5 - double(k)));
        CHECK(std::abs(w(k) - (k % 2 ? -binom : binom)) < 1e-12);
    }
    const auto long_w = frac_diff_weights(0.5, 5000000);
    CHECK(std::abs(long_w(long_w.size() - 1)) >= 1e-10);
    const double next = long_w(long_w.size() - 1) * (-(0.5 - double(long_w.size() - 1)) / double(long_w.size()));
    CHECK(std::abs(next) < 1e-10);
    CHECK(long_w.size() < 5000001);
}

TEST_CASE("fractional differencing of constant and zero series")
{
    const Vector<double> c = Vector<double>::Constant(30, 2.0);
    const auto y = frac_diff(c);
    CHECK(y.offset == 1);
    REQUIRE(y.size() == 29);
    const auto w = frac_diff_weights(0.5, 200);
    double partial = w(0);
    for (Eigen::Index t = 1; t < 30; ++t) {
        partial += w(t);
        CHECK(y.values(t - 1) == doctest::Approx(2.0 * partial).epsilon(1e-14));
        if (t > 1) CHECK(y.values(t - 1) < y.values(t - 2));
    }
    CHECK(frac_diff(Vector<double>::Zero(10)).values.isZero(0.0));
}

TEST_CASE("first differences, detrending, EMA, volatility")
{
    Vector<double> x(3);
    x << 1, 3, 6;
    CHECK(first_diff(x).values == (Vector<double>(2) << 2, 3).finished());

    Vector<double> line(80);
    for (Eigen::Index t = 0; t < 80; ++t) line(t) = 3.0 - 0.25 * double(t);
    const auto dl = rolling_detrend(line);
    CHECK(dl.offset == 51);
    CHECK(dl.values.cwiseAbs().maxCoeff() < 1e-12);
    const auto short_series = random_walk(30, 3);
    CHECK(rolling_detrend(short_series).values == first_diff(short_series).values);

    const Vector<double> c = Vector<double>::Constant(20, 1.7);
    CHECK((ema(c, 4).values.array() - 1.7).abs().maxCoeff() < 1e-15);
    Vector<double> impulse = Vector<double>::Zero(12);
    impulse(5) = 1.0;
    const auto e = ema(impulse, 4);
    CHECK(e.offset == 3);
    double level = 0.0;
    for (Eigen::Index t = 4; t < 12; ++t) {
        level = 0.4 * impulse(t) + 0.6 * level;
        CHECK(std::abs(e.values(t - 3) - level) < 1e-12);
    }
    CHECK(ema(c, 30).empty());

    Vector<double> pair(2);
    pair << 0, 2;
    CHECK(rolling_vol(pair, 2).values(0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(rolling_vol(c, 4).values.isZero(0.0));
}

TEST_CASE("causal z-score and reference scales")
{
    const auto x = random_walk(50, 5);
    const auto z = causal_zscore(x);
    CHECK(z(0) == 0.0);
    for (Eigen::Index t = 0; t < x.size(); ++t) {
        const auto head = x.head(t + 1);
        const double m = head.mean();
        const double sd = std::sqrt((head.array() - m).square().mean());
        CHECK(std::abs(z(t) - (x(t) - m) / std::max(sd, 1e-2)) < 1e-12);
    }
    CHECK(causal_zscore(Vector<double>::Constant(9, 4.0)).isZero(0.0));

    std::vector<Eigen::MatrixXd> raw{Eigen::MatrixXd(50, 2)};
    raw[0].col(0) = x;
    raw[0].col(1).setConstant(1.0);
    const auto s = reference_scales(raw, 30);
    const auto head = x.head(30);
    CHECK(s(0, 0) == doctest::Approx(std::sqrt((head.array() - head.mean()).square().mean())).epsilon(1e-14));
    CHECK(s(0, 1) == 0.01);
    raw[0].col(0) *= 10.0;
    CHECK(reference_scales(raw, 30)(0, 0) == doctest::Approx(10.0 * s(0, 0)).epsilon(1e-14));
}

TEST_CASE("gap function and future targets")
{
    std::vector<int> gaps;
    for (int h : default_horizons) gaps.push_back(gap_weeks(h));
    CHECK(gaps == std::vector<int>{6, 14, 27, 54, 106, 158});

    std::vector<Eigen::MatrixXd> y;
    for (std::size_t h = 0; h < default_horizons.size(); ++h) {
        y.push_back(Eigen::MatrixXd::Random(200, 2));
    }
    const auto f = build_future_targets(y, default_horizons);
    CHECK(f.t_star == 42);
    for (std::size_t h = 0; h < y.size(); ++h) {
        REQUIRE(f.y_future[h].rows() == 42);
        for (Eigen::Index t = 0; t < 42; ++t) CHECK(f.y_future[h].row(t) == y[h].row(t + gaps[h]));
    }
    std::vector<Eigen::MatrixXd> short_y(6, Eigen::MatrixXd::Zero(158, 2));
    CHECK_THROWS_AS(build_future_targets(short_y, default_horizons), std::runtime_error);
}

TEST_CASE("feature keys, registry order and labels")
{
    const auto k = FeatureKey::parse("VIXCLS_EMA12");
    REQUIRE(k);
    CHECK(k->base == "VIXCLS");
    CHECK(k->family == Family::ema);
    CHECK(k->window == 12);
    CHECK(k->name() == "VIXCLS_EMA12");
    CHECK_FALSE(FeatureKey::parse("VIXCLS"));
    CHECK_FALSE(FeatureKey::parse("VIXCLS_EMAx"));

    const auto order = registry_order({"DFF_VOL4", "zeta", "DFF_EMA24", "BTC_VOL8", "DFF_EMA4"});
    CHECK(order == std::vector<std::string>{"BTC_VOL8", "DFF_EMA4", "DFF_EMA24", "DFF_VOL4", "zeta"});

    CHECK(feature_label("VIXCLS_EMA24").label == "VIX EMA24w");
    CHECK(feature_label("BTC_VOL12").label == "BTC RVol12w");
    CHECK(feature_label("FGI_EMA24").label == "FGI EMA24w");
    CHECK(feature_label("median_er").label == "Median ER");
}

TEST_CASE("EMA and VOL features per window")
{
    const auto s = weekly(ymd(2020, 1, 6), std::vector<double>(40, 1.0));
    const auto f = ema_vol_features("FGI", s);
    CHECK(f.size() == 8);
    CHECK(f.at("FGI_EMA24").size() == 17);
    CHECK(f.at("FGI_EMA24").week_mondays.front() == ymd(2020, 1, 6) + std::chrono::days{7 * 23});
    CHECK(f.at("FGI_VOL4").size() == 37);
}

TEST_CASE("alignment intersects the fully observed dates")
{
    const Date d0 = ymd(2020, 1, 6);
    std::vector<double> v(20);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = double(i);
    HorizonTargets h30, h90;
    for (auto name : metrics::target_names) {
        h30[std::string(name)] = weekly(d0, v);
        h90[std::string(name)] = weekly(d0 + std::chrono::days{21}, std::vector<double>(v.begin(), v.end() - 3));
    }
    std::map<std::string, WeeklySeries> macro{{"X_EMA4", weekly(d0, v)}, {"A_VOL4", weekly(d0, v)}};
    macro["A_VOL4"].values[10] = std::nan("");

    const auto t = align_tensors({h30, h90}, macro, {30, 90}, metrics::target_names);
    std::set<Date> expected;
    for (std::size_t i = 3; i < 20; ++i) {
        if (i != 10) expected.insert(d0 + std::chrono::days{7 * i});
    }
    CHECK(std::set<Date>(t.grid.begin(), t.grid.end()) == expected);
    CHECK(t.features == std::vector<std::string>{"A_VOL4", "X_EMA4"});
    CHECK(t.y_raw[0](0, 0) == 3.0);
    CHECK(t.y_raw[1](0, 0) == 0.0);

    std::map<std::string, WeeklySeries> disjoint{{"X_EMA4", weekly(d0 + std::chrono::days{7 * 100}, v)}};
    try {
        align_tensors({h30, h90}, disjoint, {30, 90}, metrics::target_names);
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("narrowest") != std::string::npos);
    }
}

TEST_CASE("feature tensor round trip")
{
    TempDir dir("tensor");
    FeatureTensor t;
    t.basket = "ALL";
    for (int i = 0; i < 8; ++i) t.grid.push_back(ymd(2020, 1, 6) + std::chrono::days{7 * i});
    t.horizons = {30, 90};
    t.targets = {"median_er", "sharpe"};
    t.features = {"DFF_EMA4"};
    for (int h = 0; h < 2; ++h) {
        t.y_raw.push_back(Eigen::MatrixXd::Random(8, 2));
        t.x_raw.push_back(Eigen::MatrixXd::Random(8, 1));
        t.y_current.push_back(Eigen::MatrixXd::Random(8, 2));
        t.x_macro.push_back(Eigen::MatrixXd::Random(8, 1));
        t.y_future.push_back(Eigen::MatrixXd::Random(2, 2));
    }
    t.gaps = {6, 14};
    t.t_star = 2;
    t.ref_scale_y = Eigen::MatrixXd::Constant(2, 2, 0.5);
    t.ref_scale_x = Eigen::MatrixXd::Constant(2, 1, 0.25);
    t.tags["DFF"] = "RW";
    write_tensor(dir.path(), t);
    const auto back = read_tensor(dir.path());
    CHECK(back.basket == "ALL");
    CHECK(back.grid == t.grid);
    CHECK(back.features == t.features);
    CHECK(back.t_star == 2);
    CHECK(back.y_current[1] == t.y_current[1]);
    CHECK(back.y_future[0] == t.y_future[0]);
    CHECK(back.ref_scale_y == t.ref_scale_y);
    CHECK(back.tags == t.tags);
    CHECK(back.horizon_index(90) == 1);
    CHECK(back.feature_index("DFF_EMA4") == std::optional<std::size_t>{0});
}
