#pragma once

#include <hodl/enet.hpp>
#include <hodl/features.hpp>
#include <hodl/rng.hpp>

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hodl::stability {

inline constexpr double default_tau_base = 0.55;
inline constexpr double default_tau_cond = 0.50;
inline constexpr double fallback_alpha = 0.1;
inline constexpr double selection_threshold = 1e-12;

/// Train rows [0, train_end), test rows [test_begin, test_end).
struct PurgedSplit
{
    int fold = 0;
    Eigen::Index train_end = 0;
    Eigen::Index test_begin = 0;
    Eigen::Index test_end = 0;

    bool valid() const { return train_end > 0 && test_end > test_begin; }
};

/// K chronological tail blocks of length T / (K + 1) with expanding training
/// windows, each truncated at tau_k - g(h) - 1. Folds whose training set is
/// purged away are returned with train_end = 0. Empty when T < K + 1.
std::vector<PurgedSplit> purged_splits(Eigen::Index T, int K, int horizon_days);

struct CvPlan
{
    int folds = 3;
    /// Valid splits per horizon, in the order of the horizon list.
    std::vector<std::vector<PurgedSplit>> splits;
    std::vector<bool> skip_cv;
};

/// K = 3 when every horizon keeps two valid splits, else K = 2; horizons
/// with fewer than two valid splits at the final K skip CV.
CvPlan plan_purged_cv(Eigen::Index T, std::span<const int> horizons);

struct AlphaChoice
{
    double alpha = fallback_alpha;
    std::vector<double> grid;
    std::vector<double> losses;
};

/// Mean over folds of the per-observation squared Frobenius validation loss;
/// argmin over the grid with ties going to the larger alpha. Requires two or
/// more splits.
AlphaChoice select_alpha(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, std::span<const PurgedSplit> splits,
                         std::vector<double> grid);

/// The 100-point log path from alpha_max(X, Y) down to 1e-3 alpha_max.
std::vector<double> default_alpha_grid(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);

/// Median of the available per-horizon alphas, 0.1 when there are none.
double shared_alpha(std::vector<double> alphas);

/// min(20, max(4, round(n^(1/3))))
int nbb_block_size(Eigen::Index n);

/// Block starts drawn from the multiples of b not exceeding n - b, sorted,
/// concatenated as length-b runs and truncated to length n.
std::vector<Eigen::Index> nbb_indices(Eigen::Index n, int b, CounterRng& rng);

struct Probabilities
{
    std::vector<std::string> features;
    std::size_t r_valid = 0;
    /// Per base variable.
    std::map<std::string, double> pi_base;
    /// Per feature, aligned with `features`.
    std::vector<double> pi_cond;
    std::vector<std::size_t> counts;
};

/// Base of a feature name; names that are not "<base>_EMA<w>" or
/// "<base>_VOL<w>" are their own base.
std::string base_of(const std::string& feature);

/// `draws` holds one active-row mask per successful refit. Throws
/// std::runtime_error when there are none.
Probabilities stability_probabilities(const std::vector<std::string>& features,
                                      const std::vector<std::vector<bool>>& draws);

/// Bases with pi_base >= tau_base; their transforms with pi_cond >= tau_cond,
/// top-1 per family (ties to the shorter window). Registry order.
std::vector<std::string> apply_thresholds(const Probabilities& p, double tau_base = default_tau_base,
                                          double tau_cond = default_tau_cond);

struct SelectionConfig
{
    int bootstrap = 1000;
    std::uint64_t seed = 7;
    double tau_base = default_tau_base;
    double tau_cond = default_tau_cond;
    unsigned workers = 0;
};

struct HorizonSelection
{
    int horizon = 0;
    double alpha = fallback_alpha;
    bool cv_skipped = false;
    int valid_folds = 0;
    int block_size = 0;
    std::size_t r_failed = 0;
    std::size_t r_unconverged = 0;
    Probabilities probabilities;
    std::vector<std::string> selected;
};

/// Bootstrap refits at a fixed alpha on one horizon's data. Draw r uses the
/// stream (seed, horizon, r), so the result does not depend on `workers`.
HorizonSelection bootstrap_selection(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                     const std::vector<std::string>& features, int horizon_days, double alpha,
                                     const SelectionConfig& config);

struct SelectionResult
{
    std::string basket;
    int folds = 3;
    double alpha_shared = fallback_alpha;
    std::vector<HorizonSelection> horizons;
    /// Union over horizons in registry order.
    std::vector<std::string> selected;
};

/// Per horizon: purged CV for alpha on (x_macro, y_current), shared fallback
/// where CV is skipped, then bootstrap selection.
SelectionResult run_selection(const features::FeatureTensor& tensor, const SelectionConfig& config);

void write_stability_report(const std::filesystem::path& path, const SelectionResult& result,
                            const SelectionConfig& config);
void write_selected_features(const std::filesystem::path& path, const SelectionResult& result);

struct SelectedFeatures
{
    std::string basket;
    std::map<int, std::vector<std::string>> by_horizon;
    std::vector<std::string> selected;
};

SelectedFeatures read_selected_features(const std::filesystem::path& path);

} // namespace hodl::stability
