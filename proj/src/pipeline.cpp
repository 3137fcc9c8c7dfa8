#include <hodl/pipeline.hpp>

#include <hodl/csv.hpp>
#include <hodl/episode_io.hpp>
#include <hodl/features.hpp>
#include <hodl/hash.hpp>
#include <hodl/irf.hpp>
#include <hodl/metrics.hpp>
#include <hodl/report.hpp>
#include <hodl/stability.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace hodl::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

inline constexpr std::string_view tool_version = "0.1.0";

void RunConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (baskets.empty()) fail("baskets: at least one basket required");
    for (const auto& [name, symbols] : baskets) {
        if (name.empty() || name.find_first_of("/\\,") != std::string::npos) fail("baskets: invalid name '" + name + "'");
    }
    if (intervals.empty()) fail("intervals: at least one interval required");
    for (const auto& iv : intervals) {
        try {
            iv.validate();
        } catch (const std::exception& e) {
            fail(std::string("intervals: ") + e.what());
        }
    }
    if (n < 1) fail("n must be positive");
    if (!(fee >= 0 && fee < 1)) fail("fee must be in [0, 1)");
    if (max_consecutive_failures < 1) fail("max_consecutive_failures must be positive");
    if (riskfree_daily_rate && !std::isfinite(*riskfree_daily_rate)) fail("riskfree_daily_rate must be finite");
    if (horizons.empty()) fail("horizons: at least one horizon required");
    std::set<int> uppers;
    for (const auto& iv : intervals) uppers.insert(iv.upper);
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (!uppers.count(horizons[i])) {
            fail("horizons: " + std::to_string(horizons[i]) + " is not the upper bound of a configured interval");
        }
        if (i > 0 && horizons[i] <= horizons[i - 1]) fail("horizons must be strictly increasing");
    }
    for (const auto& b : model_baskets) {
        if (!baskets.count(b)) fail("model_baskets: unknown basket '" + b + "'");
    }
    if (!(tau_base > 0 && tau_base <= 1) || !(tau_cond > 0 && tau_cond <= 1)) {
        fail("selection thresholds must be in (0, 1]");
    }
    if (select_bootstrap < 1) fail("selection.bootstrap must be positive");
    if (irf_bootstrap < 200) fail("irf.bootstrap must be at least 200");
    if (!(lambda_rw1 >= 0) || !std::isfinite(lambda_rw1)) fail("irf.lambda must be finite and >= 0");
    if (!(band_level > 0 && band_level < 1)) fail("irf.level must be in (0, 1)");
    try {
        cleaning.validate();
    } catch (const std::exception& e) {
        fail(std::string("cleaning: ") + e.what());
    }
    if (!fs::is_directory(tokens())) fail("tokens directory not found: " + tokens().string());
    if (!riskfree_daily_rate && !fs::is_regular_file(riskfree())) {
        fail("risk-free file not found: " + riskfree().string() + " (or set riskfree_daily_rate)");
    }
    if (stationarity_file && !fs::is_regular_file(*stationarity_file)) {
        fail("stationarity file not found: " + stationarity_file->string());
    }
    if (compare_surface && !fs::is_regular_file(*compare_surface)) {
        fail("compare_surface not found: " + compare_surface->string());
    }
}

namespace {

const std::set<std::string> top_keys{"data_dir",       "output_dir",       "tokens_dir",   "macro_dir",
                                     "fgi_file",       "riskfree_file",    "stationarity_file",
                                     "compare_surface", "baskets",         "intervals",    "n",
                                     "fee",            "max_consecutive_failures", "riskfree_daily_rate",
                                     "seeds",          "horizons",         "model_baskets", "selection",
                                     "irf",            "cleaning",         "workers"};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

Date parse_config_date(const json& j, const std::string& field)
{
    auto d = parse_date(j.get<std::string>());
    if (!d) throw ConfigError("cleaning." + field + ": expected YYYY-MM-DD");
    return *d;
}

fs::path resolve(const fs::path& base, const json& j)
{
    fs::path p = j.get<std::string>();
    return p.is_absolute() || base.empty() ? p : base / p;
}

} // namespace

RunConfig parse_config(const json& j, const fs::path& base_dir)
{
    RunConfig c;
    try {
        check_keys(j, top_keys, "config");
        auto path_field = [&](const char* key, auto& target) {
            if (j.contains(key)) target = resolve(base_dir, j.at(key));
        };
        path_field("data_dir", c.data_dir);
        if (!j.contains("data_dir") && !base_dir.empty()) c.data_dir = base_dir / c.data_dir;
        path_field("output_dir", c.output_dir);
        if (!j.contains("output_dir") && !base_dir.empty()) c.output_dir = base_dir / c.output_dir;
        path_field("tokens_dir", c.tokens_dir);
        path_field("macro_dir", c.macro_dir);
        path_field("fgi_file", c.fgi_file);
        path_field("riskfree_file", c.riskfree_file);
        path_field("stationarity_file", c.stationarity_file);
        path_field("compare_surface", c.compare_surface);
        if (j.contains("baskets")) {
            c.baskets.clear();
            for (const auto& [name, list] : j.at("baskets").items()) {
                c.baskets[name] = list.get<std::vector<std::string>>();
            }
        }
        if (j.contains("intervals")) {
            c.intervals.clear();
            for (const auto& s : j.at("intervals")) {
                try {
                    c.intervals.push_back(sim::HorizonInterval::parse(s.get<std::string>()));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("intervals: ") + e.what());
                }
            }
        }
        if (j.contains("n")) c.n = j.at("n").get<std::size_t>();
        if (j.contains("fee")) c.fee = j.at("fee").get<double>();
        if (j.contains("max_consecutive_failures")) c.max_consecutive_failures = j.at("max_consecutive_failures").get<int>();
        if (j.contains("riskfree_daily_rate")) c.riskfree_daily_rate = j.at("riskfree_daily_rate").get<double>();
        if (j.contains("seeds")) {
            const auto& s = j.at("seeds");
            check_keys(s, {"simulate", "select", "irf"}, "seeds");
            if (s.contains("simulate")) c.seeds.simulate = s.at("simulate").get<std::uint64_t>();
            if (s.contains("select")) c.seeds.select = s.at("select").get<std::uint64_t>();
            if (s.contains("irf")) c.seeds.irf = s.at("irf").get<std::uint64_t>();
        }
        if (j.contains("horizons")) c.horizons = j.at("horizons").get<std::vector<int>>();
        if (j.contains("model_baskets")) c.model_baskets = j.at("model_baskets").get<std::vector<std::string>>();
        if (j.contains("selection")) {
            const auto& s = j.at("selection");
            check_keys(s, {"tau_base", "tau_cond", "bootstrap"}, "selection");
            if (s.contains("tau_base")) c.tau_base = s.at("tau_base").get<double>();
            if (s.contains("tau_cond")) c.tau_cond = s.at("tau_cond").get<double>();
            if (s.contains("bootstrap")) c.select_bootstrap = s.at("bootstrap").get<int>();
        }
        if (j.contains("irf")) {
            const auto& s = j.at("irf");
            check_keys(s, {"lambda", "bootstrap", "level"}, "irf");
            if (s.contains("lambda")) c.lambda_rw1 = s.at("lambda").get<double>();
            if (s.contains("bootstrap")) c.irf_bootstrap = s.at("bootstrap").get<int>();
            if (s.contains("level")) c.band_level = s.at("level").get<double>();
        }
        if (j.contains("cleaning")) {
            const auto& s = j.at("cleaning");
            check_keys(s,
                       {"min_first_date", "min_latest_date", "stablecoin_close_lo", "stablecoin_close_hi",
                        "stablecoin_close_std_max", "min_avg_volume_usd", "volume_window_days",
                        "quality_zero_days_max", "quality_tiny_volume_usd"},
                       "cleaning");
            auto& r = c.cleaning;
            if (s.contains("min_first_date")) r.min_first_date_cutoff = parse_config_date(s.at("min_first_date"), "min_first_date");
            if (s.contains("min_latest_date")) r.min_latest_date = parse_config_date(s.at("min_latest_date"), "min_latest_date");
            if (s.contains("stablecoin_close_lo")) r.stablecoin_close_lo = s.at("stablecoin_close_lo").get<double>();
            if (s.contains("stablecoin_close_hi")) r.stablecoin_close_hi = s.at("stablecoin_close_hi").get<double>();
            if (s.contains("stablecoin_close_std_max")) r.stablecoin_close_std_max = s.at("stablecoin_close_std_max").get<double>();
            if (s.contains("min_avg_volume_usd")) r.min_avg_volume_usd = s.at("min_avg_volume_usd").get<double>();
            if (s.contains("volume_window_days")) r.volume_window_days = s.at("volume_window_days").get<int>();
            if (s.contains("quality_zero_days_max")) r.quality_zero_days_max = s.at("quality_zero_days_max").get<int>();
            if (s.contains("quality_tiny_volume_usd")) r.quality_tiny_volume_usd = s.at("quality_tiny_volume_usd").get<double>();
        }
        if (j.contains("workers")) c.workers = j.at("workers").get<unsigned>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig load_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path());
}

namespace {

ojson semantic_json(const RunConfig& c)
{
    ojson j;
    ojson baskets = ojson::object();
    for (const auto& [name, list] : c.baskets) baskets[name] = list;
    j["baskets"] = std::move(baskets);
    ojson intervals = ojson::array();
    for (const auto& iv : c.intervals) intervals.push_back(iv.label());
    j["intervals"] = std::move(intervals);
    j["n"] = c.n;
    j["fee"] = c.fee;
    j["max_consecutive_failures"] = c.max_consecutive_failures;
    j["riskfree_daily_rate"] = c.riskfree_daily_rate ? ojson(*c.riskfree_daily_rate) : ojson(nullptr);
    j["seeds"] = {{"simulate", c.seeds.simulate}, {"select", c.seeds.select}, {"irf", c.seeds.irf}};
    j["horizons"] = c.horizons;
    j["model_baskets"] = c.model_baskets;
    j["selection"] = {{"tau_base", c.tau_base}, {"tau_cond", c.tau_cond}, {"bootstrap", c.select_bootstrap}};
    j["irf"] = {{"lambda", c.lambda_rw1}, {"bootstrap", c.irf_bootstrap}, {"level", c.band_level}};
    const auto& r = c.cleaning;
    j["cleaning"] = {{"min_first_date", format_date(r.min_first_date_cutoff)},
                     {"min_latest_date", format_date(r.min_latest_date)},
                     {"stablecoin_close_lo", r.stablecoin_close_lo},
                     {"stablecoin_close_hi", r.stablecoin_close_hi},
                     {"stablecoin_close_std_max", r.stablecoin_close_std_max},
                     {"min_avg_volume_usd", r.min_avg_volume_usd},
                     {"volume_window_days", r.volume_window_days},
                     {"quality_zero_days_max", r.quality_zero_days_max},
                     {"quality_tiny_volume_usd", r.quality_tiny_volume_usd}};
    return j;
}

} // namespace

ojson config_to_json(const RunConfig& c)
{
    ojson j;
    j["data_dir"] = c.data_dir.string();
    j["output_dir"] = c.output_dir.string();
    auto opt_path = [&](const char* key, const std::optional<fs::path>& p) {
        if (p) j[key] = p->string();
    };
    opt_path("tokens_dir", c.tokens_dir);
    opt_path("macro_dir", c.macro_dir);
    opt_path("fgi_file", c.fgi_file);
    opt_path("riskfree_file", c.riskfree_file);
    opt_path("stationarity_file", c.stationarity_file);
    opt_path("compare_surface", c.compare_surface);
    const auto semantic = semantic_json(c);
    for (const auto& [k, v] : semantic.items()) {
        if (k == "riskfree_daily_rate" && v.is_null()) continue;
        j[k] = v;
    }
    j["workers"] = c.workers;
    return j;
}

std::string config_hash(const RunConfig& config)
{
    return sha256_hex(semantic_json(config).dump());
}

namespace {

struct StageRecord
{
    std::string hash;
    std::map<std::string, std::string> outputs;
};

class Runner
{
public:
    Runner(const RunConfig& config, const Log& log) : _c(config), _log(log), _out(config.output_dir)
    {
        fs::create_directories(_out);
        load_records();
    }

    std::vector<StageOutcome> run(const std::vector<std::string>& requested)
    {
        std::vector<StageOutcome> outcomes;
        for (const auto& stage : stage_names) {
            if (std::find(requested.begin(), requested.end(), stage) == requested.end()) continue;
            outcomes.push_back(run_one(stage));
        }
        write_manifest();
        return outcomes;
    }

private:
    using Outputs = std::vector<fs::path>;

    const RunConfig& _c;
    Log _log;
    fs::path _out;
    std::map<std::string, StageRecord> _records;

    void say(const std::string& msg) const
    {
        if (_log) _log(msg);
    }

    fs::path records_path() const { return _out / "stages.json"; }

    void load_records()
    {
        std::ifstream in(records_path());
        if (!in) return;
        try {
            const auto j = json::parse(in);
            for (const auto& [stage, rec] : j.items()) {
                StageRecord r;
                r.hash = rec.at("hash").get<std::string>();
                r.outputs = rec.at("outputs").get<std::map<std::string, std::string>>();
                _records[stage] = std::move(r);
            }
        } catch (const json::exception&) {
            _records.clear();
        }
    }

    void save_records() const
    {
        ojson j = ojson::object();
        for (const auto& stage : stage_names) {
            auto it = _records.find(stage);
            if (it == _records.end()) continue;
            ojson outs = ojson::object();
            for (const auto& [p, h] : it->second.outputs) outs[p] = h;
            j[stage] = {{"hash", it->second.hash}, {"outputs", std::move(outs)}};
        }
        write_text(records_path(), j.dump(2) + "\n");
    }

    static void write_text(const fs::path& path, const std::string& text)
    {
        std::ofstream out(path, std::ios::trunc | std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << text;
    }

    std::string rel(const fs::path& p) const { return fs::relative(p, _out).generic_string(); }

    const StageRecord& upstream(const std::string& stage, const std::string& needed) const
    {
        auto it = _records.find(needed);
        if (it == _records.end()) {
            throw StageError(stage, "missing outputs of stage '" + needed + "'; run it first");
        }
        return it->second;
    }

    static ojson file_hashes(const std::vector<fs::path>& files, const fs::path& base)
    {
        ojson j = ojson::object();
        for (const auto& f : files) {
            j[fs::relative(f, base).generic_string()] = sha256_file(f);
        }
        return j;
    }

    static std::vector<fs::path> list_files(const fs::path& dir, std::string_view ext)
    {
        std::vector<fs::path> out;
        if (!fs::is_directory(dir)) return out;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    ojson stage_key(const std::string& stage) const
    {
        const auto sem = semantic_json(_c);
        ojson key;
        key["stage"] = stage;
        key["version"] = tool_version;
        auto upstream_hashes = [&](const std::string& prev) {
            ojson outs = ojson::object();
            for (const auto& [p, h] : upstream(stage, prev).outputs) outs[p] = h;
            return outs;
        };
        if (stage == "ingest") {
            key["cleaning"] = sem["cleaning"];
            key["tokens"] = file_hashes(list_files(_c.tokens(), ".csv"), _c.tokens());
            key["macro"] = file_hashes(list_files(_c.macro(), ".csv"), _c.macro());
            key["fgi"] = fs::is_regular_file(_c.fgi()) ? ojson(sha256_file(_c.fgi())) : ojson(nullptr);
        } else if (stage == "simulate") {
            for (const char* k : {"baskets", "intervals", "n", "fee", "max_consecutive_failures",
                                  "riskfree_daily_rate"}) {
                key[k] = sem[k];
            }
            key["seed"] = _c.seeds.simulate;
            key["riskfree"] = !_c.riskfree_daily_rate ? ojson(sha256_file(_c.riskfree())) : ojson(nullptr);
            key["inputs"] = upstream_hashes("ingest");
        } else if (stage == "metrics") {
            key["inputs"] = upstream_hashes("simulate");
        } else if (stage == "features") {
            key["horizons"] = sem["horizons"];
            key["model_baskets"] = model_baskets();
            key["stationarity"] =
                fs::is_regular_file(_c.stationarity()) ? ojson(sha256_file(_c.stationarity())) : ojson(nullptr);
            key["metrics"] = upstream_hashes("metrics");
            key["ingest"] = upstream_hashes("ingest");
        } else if (stage == "select") {
            key["selection"] = sem["selection"];
            key["seed"] = _c.seeds.select;
            key["inputs"] = upstream_hashes("features");
        } else if (stage == "irf") {
            key["irf"] = sem["irf"];
            key["seed"] = _c.seeds.irf;
            key["compare"] = _c.compare_surface ? ojson(sha256_file(*_c.compare_surface)) : ojson(nullptr);
            key["features"] = upstream_hashes("features");
            key["select"] = upstream_hashes("select");
        } else if (stage == "report") {
            key["metrics"] = upstream_hashes("metrics");
            key["irf"] = _records.count("irf") ? upstream_hashes("irf") : ojson(nullptr);
        }
        return key;
    }

    bool up_to_date(const std::string& stage, const std::string& hash) const
    {
        auto it = _records.find(stage);
        if (it == _records.end() || it->second.hash != hash) return false;
        for (const auto& [p, h] : it->second.outputs) {
            const auto path = _out / p;
            if (!fs::is_regular_file(path) || sha256_file(path) != h) return false;
        }
        return true;
    }

    StageOutcome run_one(const std::string& stage)
    {
        StageOutcome outcome;
        outcome.stage = stage;
        try {
            outcome.hash = sha256_hex(stage_key(stage).dump());
            if (up_to_date(stage, outcome.hash)) {
                outcome.skipped = true;
                say(stage + ": up to date, skipped");
                return outcome;
            }
            say(stage + ": running");
            _records.erase(stage);
            save_records();
            const Outputs outputs = dispatch(stage);
            StageRecord rec;
            rec.hash = outcome.hash;
            for (const auto& p : outputs) rec.outputs[rel(p)] = sha256_file(p);
            _records[stage] = std::move(rec);
            save_records();
            say(stage + ": done (" + std::to_string(outputs.size()) + " files)");
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(stage, e.what());
        }
        return outcome;
    }

    Outputs dispatch(const std::string& stage)
    {
        if (stage == "ingest") return ingest();
        if (stage == "simulate") return simulate();
        if (stage == "metrics") return metrics();
        if (stage == "features") return features();
        if (stage == "select") return select();
        if (stage == "irf") return irf();
        if (stage == "report") return report();
        throw StageError(stage, "unknown stage");
    }

    std::vector<std::string> model_baskets() const
    {
        if (!_c.model_baskets.empty()) return _c.model_baskets;
        std::vector<std::string> all;
        for (const auto& [name, _] : _c.baskets) all.push_back(name);
        return all;
    }

    static fs::path fresh_dir(const fs::path& dir)
    {
        fs::remove_all(dir);
        fs::create_directories(dir);
        return dir;
    }

    Outputs ingest()
    {
        const auto dir = fresh_dir(_out / "clean");
        const auto tok_dir = dir / "tokens";
        fs::create_directories(tok_dir);
        const auto raw = panel::load_panel_set(_c.tokens());
        const auto cleaned = panel::apply_cleaning_rules(raw, _c.cleaning);
        Outputs outs;
        for (const auto& p : cleaned.retained) {
            const auto path = tok_dir / (p.symbol + ".csv");
            panel::write_token_csv(path, p);
            outs.push_back(path);
        }
        outs.push_back(dir / "exclusions.json");
        panel::write_exclusions_json(outs.back(), cleaned.excluded);

        std::vector<std::string> warnings = raw.warnings;
        std::map<std::string, WeeklySeries> weekly;
        for (const auto& f : list_files(_c.macro(), ".csv")) {
            weekly[f.stem().string()] = panel::weekly_align_macro(panel::read_daily_series(f));
        }
        if (fs::is_regular_file(_c.fgi())) {
            weekly["FGI"] = panel::weekly_fgi_mean(panel::read_daily_series(_c.fgi()));
        } else {
            warnings.push_back("no FGI file at " + _c.fgi().string());
        }
        if (const auto* btc = raw.find("BTC")) {
            weekly["BTC"] = panel::btc_weekly_log_return(*btc);
        } else {
            warnings.push_back("no BTC token; BTC weekly return not built");
        }
        outs.push_back(dir / "weekly_macro.csv");
        panel::write_weekly_table(outs.back(), weekly);

        ojson summary;
        summary["tokens_loaded"] = raw.size();
        summary["tokens_retained"] = cleaned.retained.size();
        summary["tokens_excluded"] = cleaned.excluded.size();
        summary["macro_series"] = weekly.size();
        summary["warnings"] = warnings;
        outs.push_back(dir / "summary.json");
        write_text(outs.back(), summary.dump(2) + "\n");
        for (const auto& w : warnings) say("ingest: warning: " + w);
        say("ingest: " + std::to_string(cleaned.retained.size()) + " tokens retained, " +
            std::to_string(cleaned.excluded.size()) + " excluded");
        return outs;
    }

    Outputs simulate()
    {
        upstream("simulate", "ingest");
        const auto dir = fresh_dir(_out / "episodes");
        const auto cleaned = panel::load_panel_set(_out / "clean" / "tokens");
        std::optional<DailySeries> yields;
        if (!_c.riskfree_daily_rate) yields = panel::read_daily_series(_c.riskfree());
        Outputs outs;
        ojson summary = ojson::array();
        for (const auto& [basket, symbols] : _c.baskets) {
            std::vector<const panel::TokenPanel*> members;
            if (symbols.empty()) {
                for (const auto& p : cleaned.panels) members.push_back(&p);
            } else {
                for (const auto& s : symbols) {
                    const auto* p = cleaned.find(s);
                    if (!p) throw StageError("simulate", "basket " + basket + ": token " + s + " not in cleaned panel");
                    members.push_back(p);
                }
            }
            if (members.empty()) throw StageError("simulate", "basket " + basket + " has no tokens");
            const auto cube = sim::build_price_cube(basket, members);
            const auto days = std::size_t(cube.days());
            const auto curve = yields ? sim::build_risk_free_curve(cube.start, days, *yields)
                                      : sim::constant_rate_curve(cube.start, days, *_c.riskfree_daily_rate);
            for (const auto& iv : _c.intervals) {
                sim::SimConfig sc;
                sc.basket = basket;
                sc.interval = iv;
                sc.n = _c.n;
                sc.fee = _c.fee;
                sc.seed = _c.seeds.simulate;
                sc.max_consecutive_failures = _c.max_consecutive_failures;
                sc.workers = _c.workers;
                const auto batch = sim::simulate_batch(sc, cube, curve);
                const auto path = dir / (sim::episode_file_stem(basket, iv) + ".bin");
                sim::write_episodes_binary(path, batch);
                outs.push_back(path);
                summary.push_back({{"basket", basket},
                                   {"interval", iv.label()},
                                   {"episodes", batch.size()},
                                   {"attempts", batch.attempts},
                                   {"discarded", batch.discarded},
                                   {"rejected", batch.rejected},
                                   {"complete", batch.complete}});
                if (!batch.complete) {
                    say("simulate: warning: " + basket + " " + iv.label() + " stopped early with " +
                        std::to_string(batch.size()) + " episodes");
                }
            }
        }
        outs.push_back(dir / "summary.json");
        write_text(outs.back(), summary.dump(2) + "\n");
        return outs;
    }

    Outputs metrics()
    {
        upstream("metrics", "simulate");
        const auto dir = fresh_dir(_out / "metrics");
        std::vector<sim::EpisodeBatch> batches;
        for (const auto& [basket, _] : _c.baskets) {
            for (const auto& iv : _c.intervals) {
                batches.push_back(
                    sim::read_episodes_binary(_out / "episodes" / (sim::episode_file_stem(basket, iv) + ".bin")));
            }
        }
        std::vector<const sim::EpisodeBatch*> ptrs;
        std::vector<metrics::WeeklyMetricPanel> weekly;
        for (const auto& b : batches) {
            ptrs.push_back(&b);
            if (b.size() > 0) weekly.push_back(metrics::aggregate_weekly(b));
        }
        const auto overall = metrics::aggregate_overall(ptrs);
        Outputs outs{dir / "overall.csv", dir / "overall.json", dir / "key_statistics.csv",
                     dir / "weekly.csv", dir / "weekly.json", dir / "weekly_targets.csv"};
        metrics::write_overall_csv(outs[0], overall);
        metrics::write_overall_json(outs[1], overall);
        metrics::write_key_statistics_csv(outs[2], overall);
        metrics::write_weekly_csv(outs[3], weekly);
        metrics::write_weekly_json(outs[4], weekly);
        metrics::write_weekly_targets_csv(outs[5], weekly);
        return outs;
    }

    Outputs features()
    {
        upstream("features", "metrics");
        const auto dir = fresh_dir(_out / "features");
        const auto table = metrics::read_weekly_targets_csv(_out / "metrics" / "weekly_targets.csv");
        const auto macro = panel::read_weekly_table(_out / "clean" / "weekly_macro.csv");
        std::vector<std::string> log;
        std::map<std::string, features::SeriesDecision> decisions;
        if (fs::is_regular_file(_c.stationarity())) {
            decisions = features::decide_all(features::read_stationarity_csv(_c.stationarity()));
        } else {
            log.push_back("no stationarity table at " + _c.stationarity().string() + "; every series treated as RW");
        }
        Outputs outs;
        ojson built = ojson::array();
        for (const auto& basket : model_baskets()) {
            auto it = table.find(basket);
            if (it == table.end()) {
                log.push_back(basket + ": no weekly targets, skipped");
                continue;
            }
            std::map<int, features::HorizonTargets> by_h;
            bool missing = false;
            for (int h : _c.horizons) {
                auto hit = it->second.find(h);
                if (hit == it->second.end()) {
                    log.push_back(basket + ": no weekly targets for horizon " + std::to_string(h) + ", skipped");
                    missing = true;
                    break;
                }
                by_h[h] = hit->second;
            }
            if (missing) continue;
            try {
                const auto tensor = features::build_feature_tensor(basket, by_h, macro, decisions, &log);
                const auto tdir = dir / basket;
                features::write_tensor(tdir, tensor);
                for (const auto& e : fs::directory_iterator(tdir)) outs.push_back(e.path());
                built.push_back({{"basket", basket},
                                 {"weeks", tensor.periods()},
                                 {"t_star", tensor.t_star},
                                 {"features", tensor.features.size()}});
            } catch (const std::runtime_error& e) {
                log.push_back(basket + ": " + e.what());
            }
        }
        for (const auto& l : log) say("features: " + l);
        if (built.empty()) throw StageError("features", "no basket produced a feature tensor (see log above)");
        std::sort(outs.begin(), outs.end());
        outs.push_back(dir / "summary.json");
        write_text(outs.back(), ojson{{"tensors", built}, {"log", log}}.dump(2) + "\n");
        return outs;
    }

    std::vector<std::string> built_baskets(const std::string& stage) const
    {
        std::vector<std::string> out;
        for (const auto& basket : model_baskets()) {
            if (fs::is_regular_file(_out / "features" / basket / "tensor_meta.json")) out.push_back(basket);
        }
        if (out.empty()) throw StageError(stage, "no feature tensors found");
        return out;
    }

    Outputs select()
    {
        upstream("select", "features");
        const auto dir = fresh_dir(_out / "select");
        stability::SelectionConfig sc;
        sc.bootstrap = _c.select_bootstrap;
        sc.seed = _c.seeds.select;
        sc.tau_base = _c.tau_base;
        sc.tau_cond = _c.tau_cond;
        sc.workers = _c.workers;
        Outputs outs;
        for (const auto& basket : built_baskets("select")) {
            const auto tensor = features::read_tensor(_out / "features" / basket);
            const auto result = stability::run_selection(tensor, sc);
            const auto bdir = dir / basket;
            fs::create_directories(bdir);
            outs.push_back(bdir / "stability_report.json");
            stability::write_stability_report(outs.back(), result, sc);
            outs.push_back(bdir / "selected_features.json");
            stability::write_selected_features(outs.back(), result);
            say("select: " + basket + ": " + std::to_string(result.selected.size()) + " features selected");
        }
        return outs;
    }

    Outputs irf()
    {
        upstream("irf", "select");
        const auto dir = fresh_dir(_out / "irf");
        irf::IrfConfig ic;
        ic.lambda = _c.lambda_rw1;
        ic.bootstrap = _c.irf_bootstrap;
        ic.seed = _c.seeds.irf;
        ic.level = _c.band_level;
        ic.workers = _c.workers;
        std::vector<irf::IrfSurface> surfaces;
        ojson summary = ojson::array();
        for (const auto& basket : built_baskets("irf")) {
            const auto sel = stability::read_selected_features(_out / "select" / basket / "selected_features.json");
            if (sel.selected.empty()) {
                say("irf: " + basket + ": no selected features, skipped");
                summary.push_back({{"basket", basket}, {"skipped", "no selected features"}});
                continue;
            }
            const auto tensor = features::read_tensor(_out / "features" / basket);
            auto surface = irf::estimate_surface(irf::design_from_tensor(tensor, sel.selected), ic);
            summary.push_back({{"basket", basket},
                               {"predictors", sel.selected.size() + tensor.targets.size()},
                               {"replicates", surface.replicates},
                               {"dropped_statistics", surface.dropped_statistics},
                               {"ridge_fallbacks", surface.ridge_fallbacks},
                               {"mean_block_length", surface.mean_block_length},
                               {"k_max", surface.k_max}});
            surfaces.push_back(std::move(surface));
        }
        Outputs outs{dir / "irf_surface.csv", dir / "irf_surface_detail.csv", dir / "rankings.json"};
        irf::write_surface_csv(outs[0], surfaces);
        irf::write_surface_detail_csv(outs[1], surfaces);
        std::vector<irf::SurfaceCell> cells;
        for (const auto& s : surfaces) cells.insert(cells.end(), s.cells.begin(), s.cells.end());
        irf::write_rankings_json(outs[2], irf::rank_effects(cells));
        if (_c.compare_surface) {
            const auto foreign = irf::read_surface_csv(*_c.compare_surface);
            outs.push_back(dir / "agreement.json");
            irf::write_agreement_json(outs.back(), irf::compare_surfaces(cells, foreign));
        }
        outs.push_back(dir / "summary.json");
        write_text(outs.back(), summary.dump(2) + "\n");
        return outs;
    }

    Outputs report()
    {
        upstream("report", "metrics");
        const auto dir = fresh_dir(_out / "report");
        const auto overall = metrics::read_overall_csv(_out / "metrics" / "overall.csv");
        Outputs outs = report::write_bubble_charts(dir, overall);
        outs.push_back(dir / "key_statistics.csv");
        metrics::write_key_statistics_csv(outs.back(), overall);
        const auto surface_path = _out / "irf" / "irf_surface.csv";
        if (_records.count("irf") && fs::is_regular_file(surface_path)) {
            const auto cells = irf::read_surface_csv(surface_path);
            outs.push_back(dir / "irf_significant.csv");
            std::ostringstream csv;
            csv << "basket,predictor,label,target,horizon,estimate,lo,hi\n";
            for (const auto& c : cells) {
                if (!c.significant) continue;
                csv << c.basket << ',' << c.predictor << ',' << features::feature_label(c.predictor).label << ','
                    << c.target << ',' << c.horizon << ',' << csv::format_number(c.estimate) << ','
                    << csv::format_number(c.lo) << ',' << csv::format_number(c.hi) << '\n';
            }
            write_text(outs.back(), csv.str());
        }
        return outs;
    }

    void write_manifest() const
    {
        ojson m;
        m["tool"] = "hodl";
        m["version"] = tool_version;
        m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                     std::to_string(EIGEN_MINOR_VERSION);
        m["config_hash"] = config_hash(_c);
        m["seeds"] = {{"simulate", _c.seeds.simulate}, {"select", _c.seeds.select}, {"irf", _c.seeds.irf}};
        ojson stages = ojson::object();
        for (const auto& stage : stage_names) {
            auto it = _records.find(stage);
            if (it != _records.end()) stages[stage] = it->second.hash;
        }
        m["stages"] = std::move(stages);
        ojson counts = ojson::object();
        auto merge = [&](const char* key, const fs::path& path) {
            std::ifstream in(path);
            if (in) counts[key] = ojson::parse(in);
        };
        if (_records.count("ingest")) merge("ingest", _out / "clean" / "summary.json");
        if (_records.count("simulate")) merge("simulate", _out / "episodes" / "summary.json");
        if (_records.count("irf")) merge("irf", _out / "irf" / "summary.json");
        if (counts.contains("ingest")) counts["ingest"].erase("warnings");
        m["counts"] = std::move(counts);
        write_text(_out / "manifest.json", m.dump(2) + "\n");
    }
};

} // namespace

std::vector<StageOutcome> run_stages(const RunConfig& config, const std::vector<std::string>& stages, const Log& log)
{
    config.validate();
    for (const auto& s : stages) {
        if (std::find(stage_names.begin(), stage_names.end(), s) == stage_names.end()) {
            throw ConfigError("unknown stage '" + s + "'");
        }
    }
    Runner runner(config, log);
    return runner.run(stages);
}

std::vector<StageOutcome> run_pipeline(const RunConfig& config, const Log& log)
{
    return run_stages(config, stage_names, log);
}

} // namespace hodl::pipeline
