#pragma once

#include <hodl/panel.hpp>
#include <hodl/simulator.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hodl::pipeline {

/// Invalid or inconsistent configuration (exit code 1).
struct ConfigError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// A stage failed while running (exit code 2).
struct StageError : std::runtime_error
{
    StageError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage(std::move(stage))
    {
    }
    std::string stage;
};

struct Seeds
{
    std::uint64_t simulate = 42;
    std::uint64_t select = 7;
    std::uint64_t irf = 9;
};

struct RunConfig
{
    std::filesystem::path data_dir = "data";
    std::filesystem::path output_dir = "out";
    std::optional<std::filesystem::path> tokens_dir;
    std::optional<std::filesystem::path> macro_dir;
    std::optional<std::filesystem::path> fgi_file;
    std::optional<std::filesystem::path> riskfree_file;
    std::optional<std::filesystem::path> stationarity_file;
    std::optional<std::filesystem::path> compare_surface;

    /// Basket name -> symbols; an empty list means every retained token.
    std::map<std::string, std::vector<std::string>> baskets{{"ALL", {}}};
    std::vector<sim::HorizonInterval> intervals{sim::canonical_intervals.begin(), sim::canonical_intervals.end()};
    std::size_t n = 10000;
    double fee = 0.001;
    int max_consecutive_failures = 50;
    std::optional<double> riskfree_daily_rate;
    Seeds seeds;
    std::vector<int> horizons{30, 90, 180, 365, 730, 1095};
    /// Baskets carried through features, selection and IRF; empty = all.
    std::vector<std::string> model_baskets;
    double tau_base = 0.55;
    double tau_cond = 0.50;
    int select_bootstrap = 1000;
    double lambda_rw1 = 1.0;
    int irf_bootstrap = 1000;
    double band_level = 0.95;
    panel::CleaningRules cleaning;
    unsigned workers = 0;

    std::filesystem::path tokens() const { return tokens_dir.value_or(data_dir / "tokens"); }
    std::filesystem::path macro() const { return macro_dir.value_or(data_dir / "macro"); }
    std::filesystem::path fgi() const { return fgi_file.value_or(data_dir / "fgi.csv"); }
    std::filesystem::path riskfree() const { return riskfree_file.value_or(data_dir / "riskfree.csv"); }
    std::filesystem::path stationarity() const { return stationarity_file.value_or(data_dir / "stationarity.csv"); }

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Parses the JSON schema documented in the README; unknown keys are a
/// ConfigError. Relative paths resolve against `base_dir`.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json config_to_json(const RunConfig& config);

/// SHA-256 over the semantic fields only; paths and worker count are left out.
std::string config_hash(const RunConfig& config);

inline const std::vector<std::string> stage_names{"ingest", "simulate", "metrics", "features",
                                                  "select", "irf",      "report"};

struct StageOutcome
{
    std::string stage;
    bool skipped = false;
    std::string hash;
};

using Log = std::function<void(const std::string&)>;

/// Runs the named stages in pipeline order. A stage is skipped when its
/// recorded hash (inputs + relevant config) matches and every recorded
/// output still exists with the recorded content. Failures throw StageError.
std::vector<StageOutcome> run_stages(const RunConfig& config, const std::vector<std::string>& stages,
                                     const Log& log = {});

std::vector<StageOutcome> run_pipeline(const RunConfig& config, const Log& log = {});

} // namespace hodl::pipeline
