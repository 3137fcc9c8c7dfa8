#include <hodl/stability.hpp>

#include <hodl/parallel.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace hodl::stability {

using json = nlohmann::ordered_json;

std::vector<PurgedSplit> purged_splits(Eigen::Index T, int K, int horizon_days)
{
    std::vector<PurgedSplit> out;
    if (K < 1 || T < K + 1) return out;
    const Eigen::Index test_size = T / (K + 1);
    const Eigen::Index gap = features::gap_weeks(horizon_days);
    for (int k = 0; k < K; ++k) {
        PurgedSplit s;
        s.fold = k;
        s.test_begin = T - Eigen::Index(K - k) * test_size;
        s.test_end = s.test_begin + test_size;
        s.train_end = std::max<Eigen::Index>(0, s.test_begin - gap);
        out.push_back(s);
    }
    return out;
}

namespace {

std::vector<PurgedSplit> valid_only(std::vector<PurgedSplit> splits)
{
    std::erase_if(splits, [](const PurgedSplit& s) { return !s.valid(); });
    return splits;
}

} // namespace

CvPlan plan_purged_cv(Eigen::Index T, std::span<const int> horizons)
{
    CvPlan plan;
    for (int K : {3, 2}) {
        plan.folds = K;
        plan.splits.clear();
        bool all_ok = true;
        for (int h : horizons) {
            plan.splits.push_back(valid_only(purged_splits(T, K, h)));
            all_ok = all_ok && plan.splits.back().size() >= 2;
        }
        if (all_ok) break;
    }
    plan.skip_cv.clear();
    for (const auto& s : plan.splits) plan.skip_cv.push_back(s.size() < 2);
    return plan;
}

std::vector<double> default_alpha_grid(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y)
{
    double a_max = enet::alpha_max(X, Y);
    if (!(a_max > 0)) a_max = fallback_alpha;
    return enet::alpha_grid(a_max);
}

AlphaChoice select_alpha(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, std::span<const PurgedSplit> splits,
                         std::vector<double> grid)
{
    if (splits.size() < 2) throw std::invalid_argument("select_alpha: at least two valid folds required");
    if (grid.empty()) throw std::invalid_argument("select_alpha: empty candidate grid");
    AlphaChoice out;
    out.grid = std::move(grid);
    out.losses.assign(out.grid.size(), 0.0);
    std::vector<std::size_t> order(out.grid.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return out.grid[a] > out.grid[b]; });

    for (const auto& s : splits) {
        const auto g = enet::gram(X.topRows(s.train_end), Y.topRows(s.train_end));
        const auto Xt = X.middleRows(s.test_begin, s.test_end - s.test_begin);
        const auto Yt = Y.middleRows(s.test_begin, s.test_end - s.test_begin);
        Eigen::MatrixXd warm = Eigen::MatrixXd::Zero(X.cols(), Y.cols());
        for (auto i : order) {
            auto fit = enet::fit(g, out.grid[i], &warm);
            warm = fit.B;
            out.losses[i] += (Yt - Xt * fit.B).squaredNorm() / double(Yt.rows());
        }
    }
    for (auto& l : out.losses) l /= double(splits.size());

    std::size_t best = order.front();
    for (auto i : order) {
        if (out.losses[i] < out.losses[best]) best = i;
    }
    out.alpha = out.grid[best];
    return out;
}

double shared_alpha(std::vector<double> alphas)
{
    std::erase_if(alphas, [](double a) { return !std::isfinite(a); });
    if (alphas.empty()) return fallback_alpha;
    std::sort(alphas.begin(), alphas.end());
    const auto n = alphas.size();
    return n % 2 ? alphas[n / 2] : (alphas[n / 2 - 1] + alphas[n / 2]) / 2;
}

int nbb_block_size(Eigen::Index n)
{
    const auto r = std::lround(std::cbrt(double(n)));
    return int(std::min<long>(20, std::max<long>(4, r)));
}

std::vector<Eigen::Index> nbb_indices(Eigen::Index n, int b, CounterRng& rng)
{
    if (b < 1 || b > n) throw std::invalid_argument("nbb_indices: block size must be in [1, n]");
    const auto candidates = std::uint64_t((n - b) / b);
    const auto blocks = (n + b - 1) / b;
    std::vector<Eigen::Index> starts(static_cast<std::size_t>(blocks));
    for (auto& s : starts) s = Eigen::Index(rng.uniform_int(0, candidates)) * b;
    std::sort(starts.begin(), starts.end());
    std::vector<Eigen::Index> out;
    out.reserve(std::size_t(n));
    for (auto s : starts) {
        for (int i = 0; i < b && Eigen::Index(out.size()) < n; ++i) out.push_back(s + i);
    }
    return out;
}

std::string base_of(const std::string& feature)
{
    auto key = features::FeatureKey::parse(feature);
    return key ? key->base : feature;
}

Probabilities stability_probabilities(const std::vector<std::string>& names, const std::vector<std::vector<bool>>& draws)
{
    if (draws.empty()) throw std::runtime_error("stability: no successful bootstrap refits");
    Probabilities p;
    p.features = names;
    p.r_valid = draws.size();
    p.counts.assign(names.size(), 0);
    std::map<std::string, std::size_t> base_hits;
    for (const auto& name : names) base_hits[base_of(name)] = 0;
    for (const auto& mask : draws) {
        if (mask.size() != names.size()) throw std::invalid_argument("stability: mask size mismatch");
        std::map<std::string, bool> hit;
        for (std::size_t j = 0; j < names.size(); ++j) {
            if (mask[j]) {
                ++p.counts[j];
                hit[base_of(names[j])] = true;
            }
        }
        for (const auto& [base, _] : hit) ++base_hits[base];
    }
    const double R = double(p.r_valid);
    for (const auto& [base, hits] : base_hits) p.pi_base[base] = double(hits) / R;
    p.pi_cond.resize(names.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
        const double pb = p.pi_base[base_of(names[j])];
        p.pi_cond[j] = pb > 0 ? std::min(1.0, double(p.counts[j]) / (R * pb)) : 0.0;
    }
    return p;
}

std::vector<std::string> apply_thresholds(const Probabilities& p, double tau_base, double tau_cond)
{
    struct Best
    {
        std::size_t index;
        double pi;
        int window;
    };
    std::map<std::pair<std::string, int>, Best> best;
    std::vector<std::string> out;
    for (std::size_t j = 0; j < p.features.size(); ++j) {
        const auto& name = p.features[j];
        if (p.pi_base.at(base_of(name)) < tau_base || p.pi_cond[j] < tau_cond) continue;
        auto key = features::FeatureKey::parse(name);
        if (!key) {
            out.push_back(name);
            continue;
        }
        const std::pair slot{key->base, int(key->family)};
        auto it = best.find(slot);
        if (it == best.end() || p.pi_cond[j] > it->second.pi ||
            (p.pi_cond[j] == it->second.pi && key->window < it->second.window)) {
            best[slot] = {j, p.pi_cond[j], key->window};
        }
    }
    for (const auto& [_, b] : best) out.push_back(p.features[b.index]);
    return features::registry_order(std::move(out));
}

HorizonSelection bootstrap_selection(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                     const std::vector<std::string>& names, int horizon_days, double alpha,
                                     const SelectionConfig& config)
{
    if (config.bootstrap < 1) throw std::invalid_argument("bootstrap count must be positive");
    if (X.cols() != Eigen::Index(names.size())) throw std::invalid_argument("feature names do not match design");
    HorizonSelection out;
    out.horizon = horizon_days;
    out.alpha = alpha;
    const Eigen::Index n = X.rows();
    out.block_size = std::min<int>(nbb_block_size(n), int(n));
    const Eigen::MatrixXd warm = enet::fit(enet::gram(X, Y), alpha).B;

    const auto R = std::size_t(config.bootstrap);
    std::vector<std::vector<bool>> masks(R);
    std::vector<char> ok(R, 0), converged(R, 0);
    parallel_for(R, config.workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            auto rng = CounterRng::stream(config.seed, {label_id("nbb"), std::uint64_t(horizon_days), r});
            const auto idx = nbb_indices(n, out.block_size, rng);
            const Eigen::MatrixXd Xb = X(idx, Eigen::all);
            const Eigen::MatrixXd Yb = Y(idx, Eigen::all);
            auto fit = enet::fit(enet::gram(Xb, Yb), alpha, &warm);
            if (!fit.B.allFinite()) continue;
            ok[r] = 1;
            converged[r] = fit.converged;
            masks[r] = enet::active_rows(fit.B, selection_threshold);
        }
    });
    std::vector<std::vector<bool>> valid;
    for (std::size_t r = 0; r < R; ++r) {
        if (!ok[r]) {
            ++out.r_failed;
            continue;
        }
        if (!converged[r]) ++out.r_unconverged;
        valid.push_back(std::move(masks[r]));
    }
    out.probabilities = stability_probabilities(names, valid);
    out.selected = apply_thresholds(out.probabilities, config.tau_base, config.tau_cond);
    return out;
}

SelectionResult run_selection(const features::FeatureTensor& tensor, const SelectionConfig& config)
{
    if (tensor.features.empty()) throw std::runtime_error("selection: tensor has no macro features");
    SelectionResult out;
    out.basket = tensor.basket;
    const auto plan = plan_purged_cv(tensor.periods(), tensor.horizons);
    out.folds = plan.folds;

    std::vector<std::optional<double>> alphas(tensor.horizons.size());
    std::vector<double> available;
    for (std::size_t h = 0; h < tensor.horizons.size(); ++h) {
        if (plan.skip_cv[h]) continue;
        const auto& X = tensor.x_macro[h];
        const auto& Y = tensor.y_current[h];
        alphas[h] = select_alpha(X, Y, plan.splits[h], default_alpha_grid(X, Y)).alpha;
        available.push_back(*alphas[h]);
    }
    out.alpha_shared = shared_alpha(available);

    for (std::size_t h = 0; h < tensor.horizons.size(); ++h) {
        auto sel = bootstrap_selection(tensor.x_macro[h], tensor.y_current[h], tensor.features, tensor.horizons[h],
                                       alphas[h].value_or(out.alpha_shared), config);
        sel.cv_skipped = plan.skip_cv[h];
        sel.valid_folds = int(plan.splits[h].size());
        out.selected.insert(out.selected.end(), sel.selected.begin(), sel.selected.end());
        out.horizons.push_back(std::move(sel));
    }
    std::sort(out.selected.begin(), out.selected.end());
    out.selected.erase(std::unique(out.selected.begin(), out.selected.end()), out.selected.end());
    out.selected = features::registry_order(std::move(out.selected));
    return out;
}

namespace {

void write_json(const std::filesystem::path& path, const json& j)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

} // namespace

void write_stability_report(const std::filesystem::path& path, const SelectionResult& result,
                            const SelectionConfig& config)
{
    json j;
    j["basket"] = result.basket;
    j["bootstrap"] = config.bootstrap;
    j["seed"] = config.seed;
    j["tau_base"] = config.tau_base;
    j["tau_cond"] = config.tau_cond;
    j["cv_folds"] = result.folds;
    j["alpha_shared"] = result.alpha_shared;
    json horizons = json::array();
    for (const auto& h : result.horizons) {
        json e;
        e["horizon"] = h.horizon;
        e["alpha"] = h.alpha;
        e["alpha_source"] = h.cv_skipped ? "shared" : "cv";
        e["valid_folds"] = h.valid_folds;
        e["block_size"] = h.block_size;
        e["r_valid"] = h.probabilities.r_valid;
        e["r_failed"] = h.r_failed;
        e["r_unconverged"] = h.r_unconverged;
        json base = json::object();
        for (const auto& [b, pi] : h.probabilities.pi_base) base[b] = pi;
        e["pi_base"] = std::move(base);
        json cond = json::object();
        for (std::size_t f = 0; f < h.probabilities.features.size(); ++f) {
            cond[h.probabilities.features[f]] = h.probabilities.pi_cond[f];
        }
        e["pi_cond"] = std::move(cond);
        e["selected"] = h.selected;
        horizons.push_back(std::move(e));
    }
    j["horizons"] = std::move(horizons);
    write_json(path, j);
}

void write_selected_features(const std::filesystem::path& path, const SelectionResult& result)
{
    json j;
    j["basket"] = result.basket;
    json by = json::object();
    for (const auto& h : result.horizons) by[std::to_string(h.horizon)] = h.selected;
    j["by_horizon"] = std::move(by);
    j["selected"] = result.selected;
    write_json(path, j);
}

SelectedFeatures read_selected_features(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    const auto j = json::parse(in);
    SelectedFeatures out;
    out.basket = j.value("basket", std::string{});
    if (j.contains("by_horizon")) {
        for (const auto& [key, list] : j.at("by_horizon").items()) {
            out.by_horizon[std::stoi(key)] = list.get<std::vector<std::string>>();
        }
    }
    out.selected = j.at("selected").get<std::vector<std::string>>();
    return out;
}

} // namespace hodl::stability
