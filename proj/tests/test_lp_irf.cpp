#include "support.hpp"

#include <hodl/irf.hpp>
#include <hodl/lp.hpp>
#include <hodl/synth.hpp>

#include <Eigen/LU>
#include <doctest.h>

#include <cmath>

using namespace hodl;
using hodl::testing::TempDir;

namespace {

Eigen::VectorXd normals(Eigen::Index n, CounterRng& rng)
{
    Eigen::VectorXd v(n);
    for (auto& x : v) x = synth::normal(rng);
    return v;
}

irf::SurfaceCell cell(std::string basket, std::string predictor, int horizon, double estimate, bool significant,
                      std::string target = "median_er")
{
    irf::SurfaceCell c;
    c.basket = std::move(basket);
    c.predictor = std::move(predictor);
    c.target = std::move(target);
    c.horizon = horizon;
    c.estimate = estimate;
    c.lo = estimate - 0.1;
    c.hi = estimate + 0.1;
    c.significant = significant;
    return c;
}

} // namespace

TEST_CASE("OLS with HC1 errors")
{
    auto rng = CounterRng::stream(1, {});
    const Eigen::Index n = 50;
    const Eigen::VectorXd x = normals(n, rng);

    SUBCASE("perfect fit")
    {
        Eigen::MatrixXd Y(n, 1);
        Y.col(0) = 1.5 + 2.0 * x.array();
        const auto f = lp::ols_hc1(Eigen::MatrixXd(x), Y);
        CHECK(f.coef(0, 0) == doctest::Approx(1.5).epsilon(1e-12));
        CHECK(f.coef(1, 0) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(f.se.maxCoeff() < 1e-12);
        CHECK_FALSE(f.ridge);
    }
    SUBCASE("sandwich by hand")
    {
        const Eigen::VectorXd e = normals(n, rng);
        Eigen::MatrixXd Y(n, 1);
        Y.col(0) = 0.3 - x.array() + e.array() * (1.0 + x.array().abs());
        const auto f = lp::ols_hc1(Eigen::MatrixXd(x), Y);
        Eigen::MatrixXd D(n, 2);
        D.col(0).setOnes();
        D.col(1) = x;
        const Eigen::MatrixXd Ainv = (D.transpose() * D).inverse();
        const Eigen::VectorXd beta = Ainv * D.transpose() * Y.col(0);
        const Eigen::VectorXd u = Y.col(0) - D * beta;
        Eigen::Matrix2d meat = Eigen::Matrix2d::Zero();
        for (Eigen::Index i = 0; i < n; ++i) meat += u(i) * u(i) * D.row(i).transpose() * D.row(i);
        const Eigen::Matrix2d cov = double(n) / double(n - 2) * Ainv * meat * Ainv;
        CHECK(f.coef(1, 0) == doctest::Approx(beta(1)).epsilon(1e-12));
        CHECK(f.se(0, 0) == doctest::Approx(std::sqrt(cov(0, 0))).epsilon(1e-10));
        CHECK(f.se(1, 0) == doctest::Approx(std::sqrt(cov(1, 1))).epsilon(1e-10));
    }
    SUBCASE("collinear design falls back to a ridge")
    {
        Eigen::MatrixXd Z(n, 2);
        Z.col(0) = x;
        Z.col(1) = 2 * x;
        const auto f = lp::ols_hc1(Z, Eigen::MatrixXd(normals(n, rng)));
        CHECK(f.ridge);
        CHECK(f.coef.allFinite());
    }
    CHECK_THROWS_AS(lp::ols_hc1(Eigen::MatrixXd(3, 2), Eigen::MatrixXd(3, 1)), std::invalid_argument);
}

TEST_CASE("HC1 t-tests hold their size under the null")
{
    auto rng = CounterRng::stream(2, {});
    int rejections = 0;
    const int reps = 2000;
    for (int r = 0; r < reps; ++r) {
        const Eigen::MatrixXd x = normals(200, rng);
        const Eigen::MatrixXd y = normals(200, rng);
        const auto f = lp::ols_hc1(x, y);
        rejections += std::abs(f.coef(1, 0) / f.se(1, 0)) > 1.959964;
    }
    CHECK(std::abs(double(rejections) / reps - 0.05) < 0.015);
}

TEST_CASE("random-walk smoothing")
{
    const Eigen::VectorXd beta = (Eigen::VectorXd(4) << 1.0, -2.0, 0.5, 3.0).finished();
    const Eigen::VectorXd se = (Eigen::VectorXd(4) << 0.5, 1.0, 2.0, 1.0).finished();
    const Eigen::VectorXd delta = (Eigen::VectorXd(3) << 8, 13, 27).finished();

    const auto id = lp::rw1_smooth<double>(beta, se, delta, 0.0);
    CHECK((id.b - beta).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((id.se - se).cwiseAbs().maxCoeff() < 1e-10);

    const auto flat = lp::rw1_smooth<double>(beta, se, delta, 1e12);
    const Eigen::VectorXd w = se.array().square().inverse();
    const double wmean = w.dot(beta) / w.sum();
    for (double v : flat.b) CHECK(std::abs(v - wmean) < 1e-10);
    CHECK(std::abs(flat.se(0) - 1 / std::sqrt(w.sum())) < 1e-10);
    const std::vector<int> horizons{30, 90, 180, 365, 730, 1095};
    const auto gaps = lp::horizon_spacings(horizons);
    const Eigen::VectorXd six = (Eigen::VectorXd(6) << 0.4, -1.2, 0.9, 2.5, -0.3, 1.1).finished();
    const auto equal = lp::rw1_smooth<double>(six, Eigen::VectorXd::Ones(6),
                                              Eigen::Map<const Eigen::VectorXd>(gaps.data(), 5), 1e12);
    for (double v : equal.b) CHECK(std::abs(v - six.mean()) < 1e-10);

    const Eigen::VectorXd two = (Eigen::VectorXd(2) << 0, 3).finished();
    const auto pair = lp::rw1_smooth<double>(two, Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(1), 1.0);
    CHECK(std::abs(pair.b(0) - 1.0) < 1e-10);
    CHECK(std::abs(pair.b(1) - 2.0) < 1e-10);

    const Eigen::VectorXd other = (Eigen::VectorXd(4) << 0.2, 0.1, -1.0, 4.0).finished();
    const auto a = lp::rw1_smooth<double>(beta, se, delta, 3.0);
    const auto b = lp::rw1_smooth<double>(other, se, delta, 3.0);
    const auto ab = lp::rw1_smooth<double>(Eigen::VectorXd(2 * beta - 3 * other), se, delta, 3.0);
    CHECK((ab.b - (2 * a.b - 3 * b.b)).cwiseAbs().maxCoeff() < 1e-10);
    for (Eigen::Index j = 0; j < 4; ++j) CHECK(a.se(j) <= se(j) + 1e-12);

    CHECK_THROWS_AS(lp::rw1_smooth<double>(beta, se, delta, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(lp::rw1_smooth<double>(beta, se, Eigen::VectorXd::Zero(3), 1.0), std::invalid_argument);
}

TEST_CASE("horizon spacing, block length and k_max")
{
    const std::vector<int> h{30, 90, 180, 365, 730, 1095};
    CHECK(lp::horizon_spacings(h) == std::vector<double>{8, 13, 27, 52, 52});
    CHECK(lp::mean_block_length(300, h) == doctest::Approx(39.5));
    CHECK(lp::mean_block_length(30, h) == 29);
    const std::vector<int> short_h{7};
    CHECK(lp::mean_block_length(1000, short_h) == doctest::Approx(17.5));
    CHECK(lp::mean_block_length(2, short_h) == 2);
    CHECK(lp::k_max(1) == 1);
    CHECK(lp::k_max(6) == 2);
    CHECK(lp::kth_largest_abs(std::vector<double>{1, -5, 3}, 2) == 3);
}

TEST_CASE("stationary bootstrap run lengths")
{
    const Eigen::Index T = 10000;
    const double L = 39.5;
    std::size_t runs = 0, total = 0;
    for (std::uint64_t r = 0; r < 20; ++r) {
        auto rng = CounterRng::stream(4, {r});
        const auto idx = lp::stationary_bootstrap_indices(T, L, rng);
        REQUIRE(idx.size() == std::size_t(T));
        ++runs;
        for (std::size_t t = 1; t < idx.size(); ++t) {
            CHECK((idx[t] >= 0 && idx[t] < T));
            runs += idx[t] != (idx[t - 1] + 1) % T;
        }
        total += idx.size();
    }
    CHECK(std::abs(double(total) / double(runs) / L - 1) < 0.05);
}

TEST_CASE("k-max critical values")
{
    irf::BandInputs in;
    const auto one = [](double v) { return Eigen::MatrixXd::Constant(1, 1, v); };
    in.b = {one(0), one(0)};
    in.s = {one(1), one(1)};
    const std::vector<std::pair<double, double>> t{{1, 3}, {2, -1}, {-4, 5}, {0.5, 0.5}, {std::nan(""), 1}};
    for (auto [a, b] : t) {
        in.replicate_b.push_back({one(a), one(b)});
        in.replicate_s.push_back({one(1), one(1)});
    }
    // second largest |t| per replicate: {1, 1, 4, 0.5}
    const auto half = irf::critical_values(in, 0.5);
    CHECK(half.k_max == 2);
    CHECK(half.dropped == 1);
    CHECK(half.c(0, 0) == doctest::Approx(1.0));
    CHECK(irf::critical_values(in, 0.95).c(0, 0) == doctest::Approx(3.55));
}

TEST_CASE("local-projection surface")
{
    auto rng = CounterRng::stream(5, {});
    irf::LpDesign d;
    d.basket = "ALL";
    d.horizons = {30, 90, 180};
    d.predictors = {"SIG_EMA4", "NULL_EMA4"};
    d.targets = {"median_er"};
    const Eigen::Index n = 300;
    for (std::size_t h = 0; h < d.horizons.size(); ++h) {
        Eigen::MatrixXd Z(n, 2);
        Z.col(0) = normals(n, rng);
        Z.col(1) = normals(n, rng);
        d.Z.push_back(Z);
        d.Y.push_back(Eigen::MatrixXd(0.8 * Z.col(0) + normals(n, rng)));
    }
    d.scale = Eigen::MatrixXd::Constant(3, 1, 2.0);
    irf::IrfConfig cfg;
    cfg.bootstrap = 200;
    cfg.workers = 1;
    const auto s = irf::estimate_surface(d, cfg);
    CHECK(s.cells.size() == 6);
    CHECK(s.k_max == 2);
    CHECK(s.replicates == 200);
    for (int h : d.horizons) {
        const auto* c = s.find("SIG_EMA4", "median_er", h);
        REQUIRE(c);
        CHECK(c->significant);
        CHECK(c->estimate == doctest::Approx(2 * c->beta_rw1));
        CHECK(std::abs(c->beta_rw1 - 0.8) < 0.2);
        CHECK(c->lo < c->estimate);
        CHECK(c->hi > c->estimate);
    }
    CHECK_FALSE(s.find("SIG_EMA4", "median_er", 365));

    cfg.workers = 3;
    const auto again = irf::estimate_surface(d, cfg);
    for (std::size_t i = 0; i < s.cells.size(); ++i) {
        CHECK(again.cells[i].lo == s.cells[i].lo);
        CHECK(again.cells[i].critical == s.cells[i].critical);
    }

    TempDir dir("surface");
    irf::write_surface_csv(dir / "s.csv", {s});
    const auto back = irf::read_surface_csv(dir / "s.csv");
    REQUIRE(back.size() == s.cells.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].predictor == s.cells[i].predictor);
        CHECK(back[i].horizon == s.cells[i].horizon);
        CHECK(back[i].estimate == s.cells[i].estimate);
        CHECK(back[i].hi == s.cells[i].hi);
        CHECK(back[i].significant == s.cells[i].significant);
    }
}

TEST_CASE("rankings")
{
    std::vector<irf::SurfaceCell> cells;
    const std::vector<std::string> baskets{"ALL", "BTC", "ETH"};
    for (std::size_t i = 0; i < 3; ++i) {
        cells.push_back(cell(baskets[i], "A_EMA4", 30, 0.1, true));
        cells.push_back(cell(baskets[i], "B_EMA4", 30, i < 2 ? 0.5 : 0.0, i < 2));
        cells.push_back(cell(baskets[i], "C_EMA4", 30, i == 0 ? 0.6 : i == 1 ? -0.4 : 0.0, i < 2));
        cells.push_back(cell(baskets[i], "D_EMA4", 30, i < 2 ? -0.5 : 0.0, i < 2));
        cells.push_back(cell(baskets[i], "E_EMA4", 30, 9.0, false));
    }
    const auto r = irf::rank_effects(cells, 3, 4);
    const auto& cross = r.cross_basket.at({30, "median_er"});
    REQUIRE(cross.size() == 4);
    CHECK(cross[0].predictor == "A_EMA4");
    CHECK(cross[0].baskets == 3);
    CHECK(cross[1].predictor == "C_EMA4");
    CHECK(cross[2].predictor == "B_EMA4");
    CHECK(cross[3].predictor == "D_EMA4");

    const auto& top = r.top_effects.at({"ALL", 30});
    REQUIRE(top.size() == 3);
    CHECK(top[0].predictor == "C_EMA4");
    CHECK(top[1].predictor == "B_EMA4");
    CHECK(top[2].predictor == "D_EMA4");
    CHECK(r.top_effects.at({"ETH", 30}).size() == 1);
}

TEST_CASE("surface agreement")
{
    std::vector<irf::SurfaceCell> a{cell("ALL", "X_EMA4", 30, 0.5, true), cell("ALL", "X_EMA4", 90, -0.2, false),
                                    cell("BTC", "X_EMA4", 30, 0.0, false), cell("BTC", "Y_VOL8", 30, 1.0, true)};
    const auto self = irf::compare_surfaces(a, a);
    CHECK(self.count == 4);
    CHECK(self.sign_comparable == 3);
    CHECK(self.sign_match == 1.0);
    CHECK(self.overlap == 1.0);
    CHECK(self.significance_a == 0.5);
    CHECK(*self.sign_match_both_significant == 1.0);

    auto neg = a;
    for (auto& c : neg) {
        c.estimate = -c.estimate;
        std::swap(c.lo, c.hi);
        c.lo = -c.lo;
        c.hi = -c.hi;
    }
    const auto flipped = irf::compare_surfaces(a, neg);
    CHECK(flipped.sign_match == 0.0);
    CHECK(*flipped.sign_match_a_significant == 0.0);

    auto b = a;
    b[1].estimate = 0.3;
    b[1].lo = 0.2;
    b[1].hi = 0.4;
    b[3].significant = false;
    std::reverse(b.begin(), b.end());
    const auto mixed = irf::compare_surfaces(a, b);
    CHECK(mixed.sign_match == doctest::Approx(2.0 / 3.0));
    CHECK(mixed.overlap == doctest::Approx(0.75));
    CHECK(mixed.significance_b == doctest::Approx(0.25));
    CHECK(*mixed.sign_match_a_significant == 1.0);
    CHECK(*mixed.sign_match_both_significant == 1.0);

    b.pop_back();
    CHECK_THROWS_AS(irf::compare_surfaces(a, b), std::runtime_error);
}
