#include <hodl/irf.hpp>

#include <hodl/csv.hpp>
#include <hodl/metrics.hpp>
#include <hodl/parallel.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <tuple>

namespace hodl::irf {

using json = nlohmann::ordered_json;

LpDesign design_from_tensor(const features::FeatureTensor& tensor, const std::vector<std::string>& selected)
{
    if (selected.empty()) throw std::runtime_error("irf: no selected features");
    LpDesign d;
    d.basket = tensor.basket;
    d.horizons = tensor.horizons;
    d.targets = tensor.targets;
    d.predictors = tensor.targets;
    std::vector<Eigen::Index> cols;
    for (const auto& name : features::registry_order(selected)) {
        auto idx = tensor.feature_index(name);
        if (!idx) throw std::runtime_error("irf: selected feature not in tensor: " + name);
        cols.push_back(Eigen::Index(*idx));
        d.predictors.push_back(name);
    }
    const Eigen::Index n = tensor.t_star;
    const Eigen::Index ny = Eigen::Index(tensor.targets.size());
    for (std::size_t h = 0; h < tensor.horizons.size(); ++h) {
        Eigen::MatrixXd Z(n, ny + Eigen::Index(cols.size()));
        Z.leftCols(ny) = tensor.y_current[h].topRows(n);
        for (std::size_t j = 0; j < cols.size(); ++j) Z.col(ny + Eigen::Index(j)) = tensor.x_macro[h].col(cols[j]).head(n);
        d.Z.push_back(std::move(Z));
        d.Y.push_back(tensor.y_future[h]);
    }
    d.scale = tensor.ref_scale_y;
    return d;
}

const SurfaceCell* IrfSurface::find(const std::string& predictor, const std::string& target, int horizon) const
{
    for (const auto& c : cells) {
        if (c.predictor == predictor && c.target == target && c.horizon == horizon) return &c;
    }
    return nullptr;
}

RawPaths estimate_raw(const LpDesign& design, const std::vector<Eigen::Index>* rows)
{
    RawPaths out;
    for (std::size_t h = 0; h < design.horizons.size(); ++h) {
        lp::OlsFit<double> fit;
        if (rows) {
            fit = lp::ols_hc1(design.Z[h](*rows, Eigen::all), design.Y[h](*rows, Eigen::all));
        } else {
            fit = lp::ols_hc1(design.Z[h], design.Y[h]);
        }
        const auto P = fit.coef.rows() - 1;
        out.intercept.push_back(fit.coef.topRows(1));
        out.beta.push_back(fit.coef.bottomRows(P));
        out.se.push_back(fit.se.bottomRows(P));
        out.ridge = out.ridge || fit.ridge;
    }
    return out;
}

void smooth_paths(const RawPaths& raw, std::span<const int> horizons, double lambda, std::vector<Eigen::MatrixXd>& b,
                  std::vector<Eigen::MatrixXd>& s)
{
    const auto H = Eigen::Index(horizons.size());
    const auto spacing = lp::horizon_spacings(horizons);
    const Eigen::VectorXd delta = Eigen::Map<const Eigen::VectorXd>(spacing.data(), Eigen::Index(spacing.size()));
    const Eigen::Index P = raw.beta.front().rows();
    const Eigen::Index K = raw.beta.front().cols();
    b.assign(std::size_t(H), Eigen::MatrixXd(P, K));
    s.assign(std::size_t(H), Eigen::MatrixXd(P, K));
    Eigen::VectorXd path(H), errs(H);
    for (Eigen::Index p = 0; p < P; ++p) {
        for (Eigen::Index k = 0; k < K; ++k) {
            for (Eigen::Index h = 0; h < H; ++h) {
                path(h) = raw.beta[std::size_t(h)](p, k);
                errs(h) = raw.se[std::size_t(h)](p, k);
            }
            const auto sm = lp::rw1_smooth<double>(path, errs, delta, lambda);
            for (Eigen::Index h = 0; h < H; ++h) {
                b[std::size_t(h)](p, k) = sm.b(h);
                s[std::size_t(h)](p, k) = sm.se(h);
            }
        }
    }
}

Critical critical_values(const BandInputs& in, double level)
{
    if (!(level > 0 && level < 1)) throw std::invalid_argument("band level must be in (0, 1)");
    const auto H = in.b.size();
    if (H == 0) throw std::invalid_argument("critical_values: no horizons");
    const Eigen::Index P = in.b.front().rows();
    const Eigen::Index K = in.b.front().cols();
    Critical out;
    out.k_max = lp::k_max(int(H));
    out.c.resize(P, K);
    std::vector<double> t(H);
    for (Eigen::Index p = 0; p < P; ++p) {
        for (Eigen::Index k = 0; k < K; ++k) {
            std::vector<double> M;
            M.reserve(in.replicate_b.size());
            for (std::size_t r = 0; r < in.replicate_b.size(); ++r) {
                bool finite = true;
                for (std::size_t h = 0; h < H; ++h) {
                    t[h] = (in.replicate_b[r][h](p, k) - in.b[h](p, k)) / in.replicate_s[r][h](p, k);
                    finite = finite && std::isfinite(t[h]);
                }
                if (!finite) {
                    ++out.dropped;
                    continue;
                }
                M.push_back(lp::kth_largest_abs(t, out.k_max));
            }
            if (M.empty()) {
                out.c(p, k) = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            std::sort(M.begin(), M.end());
            out.c(p, k) = metrics::quantile_sorted(M, level);
        }
    }
    return out;
}

IrfSurface estimate_surface(const LpDesign& design, const IrfConfig& config)
{
    if (design.horizons.empty() || design.Z.size() != design.horizons.size() ||
        design.Y.size() != design.horizons.size()) {
        throw std::invalid_argument("irf: design has inconsistent horizons");
    }
    if (config.bootstrap < 1) throw std::invalid_argument("irf: bootstrap count must be positive");
    const Eigen::Index n = design.observations();
    for (std::size_t h = 0; h < design.horizons.size(); ++h) {
        if (design.Z[h].rows() != n || design.Y[h].rows() != n) throw std::invalid_argument("irf: row mismatch");
    }
    IrfSurface out;
    out.basket = design.basket;
    out.mean_block_length = lp::mean_block_length(n, design.horizons);

    const auto raw = estimate_raw(design);
    BandInputs bands;
    smooth_paths(raw, design.horizons, config.lambda, bands.b, bands.s);

    const auto R = std::size_t(config.bootstrap);
    bands.replicate_b.resize(R);
    bands.replicate_s.resize(R);
    std::vector<char> ridge(R, 0);
    parallel_for(R, config.workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            auto rng = CounterRng::stream(config.seed, {label_id("stationary"), label_id(design.basket), r});
            const auto rows = lp::stationary_bootstrap_indices(n, out.mean_block_length, rng);
            const auto rep = estimate_raw(design, &rows);
            ridge[r] = rep.ridge;
            smooth_paths(rep, design.horizons, config.lambda, bands.replicate_b[r], bands.replicate_s[r]);
        }
    });
    out.replicates = R;
    out.ridge_fallbacks = std::size_t(std::count(ridge.begin(), ridge.end(), 1)) + (raw.ridge ? 1 : 0);

    const auto crit = critical_values(bands, config.level);
    out.dropped_statistics = crit.dropped;
    out.k_max = crit.k_max;
    for (std::size_t p = 0; p < design.predictors.size(); ++p) {
        for (std::size_t k = 0; k < design.targets.size(); ++k) {
            for (std::size_t h = 0; h < design.horizons.size(); ++h) {
                const auto P = Eigen::Index(p), K = Eigen::Index(k), Hh = Eigen::Index(h);
                SurfaceCell c;
                c.basket = design.basket;
                c.predictor = design.predictors[p];
                c.target = design.targets[k];
                c.horizon = design.horizons[h];
                c.beta_raw = raw.beta[h](P, K);
                c.se_raw = raw.se[h](P, K);
                c.beta_rw1 = bands.b[h](P, K);
                c.se_rw1 = bands.s[h](P, K);
                c.critical = crit.c(P, K);
                c.scale = design.scale.size() ? design.scale(Hh, K) : 1.0;
                c.estimate = c.beta_rw1 * c.scale;
                c.lo = (c.beta_rw1 - c.critical * c.se_rw1) * c.scale;
                c.hi = (c.beta_rw1 + c.critical * c.se_rw1) * c.scale;
                c.significant = c.lo > 0 || c.hi < 0;
                out.cells.push_back(std::move(c));
            }
        }
    }
    return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void write_json(const std::filesystem::path& path, const json& j)
{
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

} // namespace

void write_surface_csv(const std::filesystem::path& path, const std::vector<IrfSurface>& surfaces)
{
    auto out = open_out(path);
    out << "basket,predictor,target,horizon,estimate,lo,hi,significant\n";
    for (const auto& s : surfaces) {
        for (const auto& c : s.cells) {
            out << c.basket << ',' << c.predictor << ',' << c.target << ',' << c.horizon << ','
                << csv::format_number(c.estimate) << ',' << csv::format_number(c.lo) << ','
                << csv::format_number(c.hi) << ',' << (c.significant ? "true" : "false") << '\n';
        }
    }
}

void write_surface_detail_csv(const std::filesystem::path& path, const std::vector<IrfSurface>& surfaces)
{
    auto out = open_out(path);
    out << "basket,predictor,target,horizon,beta_raw,se_raw,beta_rw1,se_rw1,critical,scale\n";
    for (const auto& s : surfaces) {
        for (const auto& c : s.cells) {
            out << c.basket << ',' << c.predictor << ',' << c.target << ',' << c.horizon << ','
                << csv::format_number(c.beta_raw) << ',' << csv::format_number(c.se_raw) << ','
                << csv::format_number(c.beta_rw1) << ',' << csv::format_number(c.se_rw1) << ','
                << csv::format_number(c.critical) << ',' << csv::format_number(c.scale) << '\n';
        }
    }
}

std::vector<SurfaceCell> read_surface_csv(const std::filesystem::path& path)
{
    const auto t = csv::read(path);
    const char* required[] = {"basket", "predictor", "target", "horizon", "estimate", "lo", "hi", "significant"};
    std::vector<std::size_t> col;
    for (const char* name : required) {
        auto c = t.column(name);
        if (!c) throw std::runtime_error(path.string() + ": missing column " + name);
        col.push_back(*c);
    }
    std::vector<SurfaceCell> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        auto field = [&](std::size_t i) -> const std::string& {
            if (col[i] >= row.size()) throw std::runtime_error(path.string() + ": short row " + std::to_string(r + 2));
            return row[col[i]];
        };
        auto number = [&](std::size_t i) {
            auto v = csv::parse_number(field(i));
            if (!v) throw std::runtime_error(path.string() + ": bad number on row " + std::to_string(r + 2));
            return *v;
        };
        SurfaceCell c;
        c.basket = field(0);
        c.predictor = field(1);
        c.target = field(2);
        c.horizon = int(number(3));
        c.estimate = number(4);
        c.lo = number(5);
        c.hi = number(6);
        std::string sig = field(7);
        std::transform(sig.begin(), sig.end(), sig.begin(), [](unsigned char ch) { return char(std::tolower(ch)); });
        c.significant = sig == "true" || sig == "1";
        out.push_back(std::move(c));
    }
    return out;
}

Rankings rank_effects(const std::vector<SurfaceCell>& cells, std::size_t top_effects, std::size_t top_predictors)
{
    Rankings out;
    for (const auto& c : cells) {
        if (c.significant) {
            out.top_effects[{c.basket, c.horizon}].push_back({c.basket, c.predictor, c.target, c.horizon, c.estimate});
        }
    }
    for (auto& [_, list] : out.top_effects) {
        std::sort(list.begin(), list.end(), [](const RankedEffect& a, const RankedEffect& b) {
            const double fa = std::abs(a.estimate), fb = std::abs(b.estimate);
            if (fa != fb) return fa > fb;
            return std::tie(a.predictor, a.target) < std::tie(b.predictor, b.target);
        });
        if (list.size() > top_effects) list.resize(top_effects);
    }

    struct Acc
    {
        int baskets = 0;
        double sum_abs = 0;
        double max_abs = 0;
        int n = 0;
    };
    std::map<std::pair<int, std::string>, std::map<std::string, Acc>> acc;
    for (const auto& c : cells) {
        auto& a = acc[{c.horizon, c.target}][c.predictor];
        a.baskets += c.significant ? 1 : 0;
        a.sum_abs += std::abs(c.estimate);
        a.max_abs = std::max(a.max_abs, std::abs(c.estimate));
        ++a.n;
    }
    for (const auto& [key, by_pred] : acc) {
        std::vector<StabilityRank> list;
        for (const auto& [pred, a] : by_pred) {
            if (a.baskets > 0) list.push_back({pred, a.baskets, a.sum_abs / a.n, a.max_abs});
        }
        std::sort(list.begin(), list.end(), [](const StabilityRank& a, const StabilityRank& b) {
            if (a.baskets != b.baskets) return a.baskets > b.baskets;
            if (a.mean_abs != b.mean_abs) return a.mean_abs > b.mean_abs;
            if (a.max_abs != b.max_abs) return a.max_abs > b.max_abs;
            return a.predictor < b.predictor;
        });
        if (list.size() > top_predictors) list.resize(top_predictors);
        if (!list.empty()) out.cross_basket[key] = std::move(list);
    }
    return out;
}

void write_rankings_json(const std::filesystem::path& path, const Rankings& rankings)
{
    json top = json::array();
    for (const auto& [key, list] : rankings.top_effects) {
        json e;
        e["basket"] = key.first;
        e["horizon"] = key.second;
        json items = json::array();
        for (const auto& r : list) {
            items.push_back({{"predictor", r.predictor},
                             {"label", features::feature_label(r.predictor).label},
                             {"target", r.target},
                             {"estimate", r.estimate}});
        }
        e["effects"] = std::move(items);
        top.push_back(std::move(e));
    }
    json cross = json::array();
    for (const auto& [key, list] : rankings.cross_basket) {
        json e;
        e["horizon"] = key.first;
        e["target"] = key.second;
        json items = json::array();
        for (const auto& r : list) {
            items.push_back({{"predictor", r.predictor},
                             {"label", features::feature_label(r.predictor).label},
                             {"baskets", r.baskets},
                             {"mean_abs_effect", r.mean_abs},
                             {"max_abs_effect", r.max_abs}});
        }
        e["predictors"] = std::move(items);
        cross.push_back(std::move(e));
    }
    write_json(path, json{{"top_effects", std::move(top)}, {"cross_basket", std::move(cross)}});
}

AgreementSummary compare_surfaces(const std::vector<SurfaceCell>& a, const std::vector<SurfaceCell>& b)
{
    using Key = std::tuple<std::string, std::string, std::string, int>;
    auto key_of = [](const SurfaceCell& c) { return Key{c.basket, c.predictor, c.target, c.horizon}; };
    std::map<Key, const SurfaceCell*> index;
    for (const auto& c : b) {
        if (!index.emplace(key_of(c), &c).second) throw std::runtime_error("compare: duplicate key in surface B");
    }
    if (a.size() != b.size()) throw std::runtime_error("compare: surfaces have different key sets");
    AgreementSummary s;
    std::set<Key> seen;
    std::size_t sign_hits = 0, overlaps = 0, sig_a = 0, sig_b = 0;
    std::size_t a_sig_n = 0, a_sig_hits = 0, both_n = 0, both_hits = 0;
    for (const auto& ca : a) {
        const auto key = key_of(ca);
        if (!seen.insert(key).second) throw std::runtime_error("compare: duplicate key in surface A");
        auto it = index.find(key);
        if (it == index.end()) {
            throw std::runtime_error("compare: key missing from surface B: " + ca.basket + "/" + ca.predictor + "/" +
                                     ca.target + "/" + std::to_string(ca.horizon));
        }
        const auto& cb = *it->second;
        ++s.count;
        sig_a += ca.significant;
        sig_b += cb.significant;
        overlaps += std::max(ca.lo, cb.lo) <= std::min(ca.hi, cb.hi);
        if (ca.estimate == 0 || cb.estimate == 0) continue;
        const bool match = (ca.estimate > 0) == (cb.estimate > 0);
        ++s.sign_comparable;
        sign_hits += match;
        if (ca.significant) {
            ++a_sig_n;
            a_sig_hits += match;
            if (cb.significant) {
                ++both_n;
                both_hits += match;
            }
        }
    }
    auto rate = [](std::size_t hits, std::size_t n) { return n ? double(hits) / double(n) : 0.0; };
    s.sign_match = rate(sign_hits, s.sign_comparable);
    s.overlap = rate(overlaps, s.count);
    s.significance_a = rate(sig_a, s.count);
    s.significance_b = rate(sig_b, s.count);
    if (a_sig_n) s.sign_match_a_significant = rate(a_sig_hits, a_sig_n);
    if (both_n) s.sign_match_both_significant = rate(both_hits, both_n);
    return s;
}

void write_agreement_json(const std::filesystem::path& path, const AgreementSummary& s)
{
    json j;
    j["count"] = s.count;
    j["sign_comparable"] = s.sign_comparable;
    j["sign_match_rate"] = s.sign_match;
    j["interval_overlap_rate"] = s.overlap;
    j["significance_rate_a"] = s.significance_a;
    j["significance_rate_b"] = s.significance_b;
    j["sign_match_a_significant"] = s.sign_match_a_significant ? json(*s.sign_match_a_significant) : json(nullptr);
    j["sign_match_both_significant"] =
        s.sign_match_both_significant ? json(*s.sign_match_both_significant) : json(nullptr);
    write_json(path, j);
}

} // namespace hodl::irf
