#include <hodl/episode_io.hpp>
#include <hodl/features.hpp>
#include <hodl/hash.hpp>
#include <hodl/irf.hpp>
#include <hodl/panel.hpp>
#include <hodl/pipeline.hpp>
#include <hodl/simulator.hpp>
#include <hodl/stability.hpp>
#include <hodl/synth.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace hodl;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_stage = 2;

struct Overrides
{
    std::string config;
    std::optional<std::uint64_t> seed_simulate, seed_select, seed_irf;
    std::optional<unsigned> workers;
    std::string output;
};

void add_config_options(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--config", o.config, "Run configuration (JSON)");
    cmd->add_option("--seed-simulate", o.seed_simulate, "Override the simulation seed");
    cmd->add_option("--seed-select", o.seed_select, "Override the selection seed");
    cmd->add_option("--seed-irf", o.seed_irf, "Override the IRF bootstrap seed");
    cmd->add_option("--workers", o.workers, "Worker threads (0 = all cores)");
    cmd->add_option("--output", o.output, "Override the output directory");
}

pipeline::RunConfig resolve_config(const Overrides& o)
{
    if (o.config.empty()) throw pipeline::ConfigError("--config is required");
    auto c = pipeline::load_config(o.config);
    if (o.seed_simulate) c.seeds.simulate = *o.seed_simulate;
    if (o.seed_select) c.seeds.select = *o.seed_select;
    if (o.seed_irf) c.seeds.irf = *o.seed_irf;
    if (o.workers) c.workers = *o.workers;
    if (!o.output.empty()) c.output_dir = o.output;
    return c;
}

int run_config_stages(const Overrides& o, const std::vector<std::string>& stages)
{
    const auto config = resolve_config(o);
    const auto outcomes =
        pipeline::run_stages(config, stages, [](const std::string& msg) { std::cerr << msg << '\n'; });
    std::cout << "config " << pipeline::config_hash(config).substr(0, 16) << '\n';
    for (const auto& s : outcomes) {
        std::cout << s.stage << (s.skipped ? " skipped " : " ran ") << s.hash.substr(0, 16) << '\n';
    }
    return exit_ok;
}

struct SimulateArgs
{
    std::string tokens;
    std::string riskfree;
    std::optional<double> rate;
    std::string basket = "ALL";
    std::vector<std::string> symbols;
    std::string interval = "731-1095";
    std::size_t n = 10000;
    double fee = 0.001;
    std::uint64_t seed = 42;
    unsigned workers = 0;
    std::string out = ".";
    bool csv = false;
};

int run_simulate(const SimulateArgs& a)
{
    if (a.tokens.empty()) throw pipeline::ConfigError("simulate: --tokens or --config is required");
    if (a.riskfree.empty() && !a.rate) throw pipeline::ConfigError("simulate: --riskfree or --rate is required");
    sim::SimConfig sc;
    sc.basket = a.basket;
    try {
        sc.interval = sim::HorizonInterval::parse(a.interval);
    } catch (const std::invalid_argument& e) {
        throw pipeline::ConfigError(e.what());
    }
    sc.n = a.n;
    sc.fee = a.fee;
    sc.seed = a.seed;
    sc.workers = a.workers;
    try {
        sc.validate();
    } catch (const std::invalid_argument& e) {
        throw pipeline::ConfigError(e.what());
    }
    const auto set = panel::load_panel_set(a.tokens);
    std::vector<const panel::TokenPanel*> members;
    if (a.symbols.empty()) {
        for (const auto& p : set.panels) members.push_back(&p);
    } else {
        for (const auto& s : a.symbols) {
            const auto* p = set.find(s);
            if (!p) throw pipeline::StageError("simulate", "token not found: " + s);
            members.push_back(p);
        }
    }
    if (members.empty()) throw pipeline::StageError("simulate", "no tokens in " + a.tokens);
    const auto cube = sim::build_price_cube(a.basket, members);
    const auto days = std::size_t(cube.days());
    const auto curve = a.rate ? sim::constant_rate_curve(cube.start, days, *a.rate)
                              : sim::build_risk_free_curve(cube.start, days, panel::read_daily_series(a.riskfree));
    const auto batch = sim::simulate_batch(sc, cube, curve);
    fs::create_directories(a.out);
    const auto stem = fs::path(a.out) / sim::episode_file_stem(a.basket, sc.interval);
    auto bin = stem;
    bin += ".bin";
    sim::write_episodes_binary(bin, batch);
    if (a.csv) {
        auto csv = stem;
        csv += ".csv";
        sim::write_episodes_csv(csv, batch);
    }
    std::cout << bin.string() << ' ' << batch.size() << " episodes, " << batch.attempts << " attempts, sha256 "
              << sha256_file(bin) << '\n';
    if (!batch.complete) std::cerr << "warning: stopped early after consecutive failures\n";
    return exit_ok;
}

int run_select(const std::string& tensor_dir, int bootstrap, std::uint64_t seed, unsigned workers,
               const std::string& out)
{
    const auto tensor = features::read_tensor(tensor_dir);
    stability::SelectionConfig sc;
    sc.bootstrap = bootstrap;
    sc.seed = seed;
    sc.workers = workers;
    const auto result = stability::run_selection(tensor, sc);
    fs::create_directories(out);
    stability::write_stability_report(fs::path(out) / "stability_report.json", result, sc);
    stability::write_selected_features(fs::path(out) / "selected_features.json", result);
    std::cout << result.basket << ": " << result.selected.size() << " features selected\n";
    for (const auto& f : result.selected) std::cout << "  " << f << '\n';
    return exit_ok;
}

int run_irf(const std::string& tensor_dir, const std::string& features_file, int bootstrap, double lambda,
            std::uint64_t seed, unsigned workers, const std::string& out)
{
    const auto tensor = features::read_tensor(tensor_dir);
    const auto sel = stability::read_selected_features(features_file);
    irf::IrfConfig ic;
    ic.bootstrap = bootstrap;
    ic.lambda = lambda;
    ic.seed = seed;
    ic.workers = workers;
    const auto surface = irf::estimate_surface(irf::design_from_tensor(tensor, sel.selected), ic);
    fs::create_directories(out);
    irf::write_surface_csv(fs::path(out) / "irf_surface.csv", {surface});
    irf::write_surface_detail_csv(fs::path(out) / "irf_surface_detail.csv", {surface});
    irf::write_rankings_json(fs::path(out) / "rankings.json", irf::rank_effects(surface.cells));
    std::size_t sig = 0;
    for (const auto& c : surface.cells) sig += c.significant;
    std::cout << surface.basket << ": " << surface.cells.size() << " cells, " << sig << " significant\n";
    return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Buy-and-hold crypto episode simulator and local-projection toolkit"};
    app.require_subcommand(1);

    std::vector<Overrides> overrides(10);
    std::size_t slot = 0;

    auto* ingest = app.add_subcommand("ingest", "Clean token panels and align macro series");
    auto* metrics = app.add_subcommand("metrics", "Aggregate episode metrics");
    auto* features = app.add_subcommand("features", "Build feature tensors");
    auto* report = app.add_subcommand("report", "Emit bubble charts and report tables");
    auto* all = app.add_subcommand("all", "Run every stage");
    for (auto* cmd : {ingest, metrics, features, report, all}) add_config_options(cmd, overrides[slot++]);

    SimulateArgs sa;
    Overrides& sim_o = overrides[slot++];
    auto* simulate = app.add_subcommand("simulate", "Simulate episodes (config stage or one basket/interval)");
    add_config_options(simulate, sim_o);
    simulate->add_option("--tokens", sa.tokens, "Directory of token CSV files");
    simulate->add_option("--riskfree", sa.riskfree, "Date,Value file of annualized percent yields");
    simulate->add_option("--rate", sa.rate, "Constant daily risk-free rate instead of --riskfree");
    simulate->add_option("--basket", sa.basket, "Basket name");
    simulate->add_option("--symbols", sa.symbols, "Basket members (default: every token)")->delimiter(',');
    simulate->add_option("--interval", sa.interval, "Holding interval in days, e.g. 731-1095");
    simulate->add_option("--n", sa.n, "Episodes to collect");
    simulate->add_option("--fee", sa.fee, "Proportional fee per side");
    simulate->add_option("--seed", sa.seed, "Simulation seed");
    simulate->add_option("--threads", sa.workers, "Worker threads (0 = all cores)");
    simulate->add_option("--out", sa.out, "Output directory");
    simulate->add_flag("--csv", sa.csv, "Also write the episodes as CSV");

    std::string tensor_dir, features_file, out_dir = ".";
    int sel_bootstrap = 1000, irf_bootstrap = 1000;
    std::uint64_t sel_seed = 7, irf_seed = 9;
    double lambda = 1.0;
    unsigned threads = 0;
    Overrides& sel_o = overrides[slot++];
    auto* select = app.add_subcommand("select", "Stability selection (config stage or one tensor)");
    add_config_options(select, sel_o);
    select->add_option("--tensor", tensor_dir, "Feature tensor directory");
    select->add_option("--bootstrap", sel_bootstrap, "Bootstrap draws");
    select->add_option("--seed", sel_seed, "Selection seed");
    select->add_option("--threads", threads, "Worker threads (0 = all cores)");
    select->add_option("--out", out_dir, "Output directory");

    Overrides& irf_o = overrides[slot++];
    auto* irf = app.add_subcommand("irf", "Local-projection surface (config stage or one tensor)");
    add_config_options(irf, irf_o);
    irf->add_option("--tensor", tensor_dir, "Feature tensor directory");
    irf->add_option("--features", features_file, "selected_features.json");
    irf->add_option("--bootstrap", irf_bootstrap, "Stationary bootstrap replicates")->check(CLI::Range(200, 1000000));
    irf->add_option("--lambda", lambda, "RW1 smoothing strength")->check(CLI::NonNegativeNumber);
    irf->add_option("--seed", irf_seed, "Bootstrap seed");
    irf->add_option("--threads", threads, "Worker threads (0 = all cores)");
    irf->add_option("--out", out_dir, "Output directory");

    std::string surface_a, surface_b, agreement_out;
    auto* compare = app.add_subcommand("compare", "Agreement metrics between two IRF surface CSV files");
    compare->add_option("surface_a", surface_a, "Reference surface")->required()->check(CLI::ExistingFile);
    compare->add_option("surface_b", surface_b, "Comparison surface")->required()->check(CLI::ExistingFile);
    compare->add_option("--out", agreement_out, "Write agreement.json here");

    std::string synth_dir;
    synth::DemoOptions demo;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic demo dataset and run.json");
    synth_cmd->add_option("dir", synth_dir, "Target directory")->required();
    synth_cmd->add_option("--days", demo.days, "Calendar days of history");
    synth_cmd->add_option("--seed", demo.seed, "Generator seed");
    synth_cmd->add_option("--n", demo.n, "Episodes per interval in run.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? exit_ok : exit_config;
    }

    try {
        slot = 0;
        for (auto* cmd : {ingest, metrics, features, report}) {
            if (cmd->parsed()) return run_config_stages(overrides[slot], {cmd->get_name()});
            ++slot;
        }
        if (all->parsed()) return run_config_stages(overrides[slot], pipeline::stage_names);
        if (simulate->parsed()) {
            if (!sim_o.config.empty()) return run_config_stages(sim_o, {"simulate"});
            return run_simulate(sa);
        }
        if (select->parsed()) {
            if (!sel_o.config.empty()) return run_config_stages(sel_o, {"select"});
            if (tensor_dir.empty()) throw pipeline::ConfigError("select: --tensor or --config is required");
            return run_select(tensor_dir, sel_bootstrap, sel_seed, threads, out_dir);
        }
        if (irf->parsed()) {
            if (!irf_o.config.empty()) return run_config_stages(irf_o, {"irf"});
            if (tensor_dir.empty() || features_file.empty()) {
                throw pipeline::ConfigError("irf: --tensor and --features (or --config) are required");
            }
            return run_irf(tensor_dir, features_file, irf_bootstrap, lambda, irf_seed, threads, out_dir);
        }
        if (compare->parsed()) {
            const auto s = irf::compare_surfaces(irf::read_surface_csv(surface_a), irf::read_surface_csv(surface_b));
            std::cout << "keys " << s.count << "\nsign_match " << s.sign_match << "\noverlap " << s.overlap
                      << "\nsignificance_a " << s.significance_a << "\nsignificance_b " << s.significance_b << '\n';
            if (!agreement_out.empty()) irf::write_agreement_json(agreement_out, s);
            return exit_ok;
        }
        if (synth_cmd->parsed()) {
            synth::write_demo_dataset(synth_dir, demo);
            std::cout << "demo dataset written to " << synth_dir << " (run: hodl all --config "
                      << (fs::path(synth_dir) / "run.json").string() << ")\n";
            return exit_ok;
        }
    } catch (const pipeline::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const pipeline::StageError& e) {
        std::cerr << "stage failed: " << e.what() << '\n';
        return exit_stage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_stage;
    }
    return exit_ok;
}
