#pragma once

#include <hodl/features.hpp>
#include <hodl/lp.hpp>

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hodl::irf {

/// Regression inputs for every horizon: Z[h] is t* x P (targets first, then
/// selected macro features), Y[h] is t* x K, scale is H x K native-unit
/// reference scales.
struct LpDesign
{
    std::string basket;
    std::vector<int> horizons;
    std::vector<std::string> predictors;
    std::vector<std::string> targets;
    std::vector<Eigen::MatrixXd> Z;
    std::vector<Eigen::MatrixXd> Y;
    Eigen::MatrixXd scale;

    Eigen::Index observations() const { return Z.empty() ? 0 : Z.front().rows(); }
};

LpDesign design_from_tensor(const features::FeatureTensor& tensor, const std::vector<std::string>& selected);

struct IrfConfig
{
    double lambda = 1.0;
    int bootstrap = 1000;
    std::uint64_t seed = 9;
    double level = 0.95;
    unsigned workers = 0;
};

struct SurfaceCell
{
    std::string basket;
    std::string predictor;
    std::string target;
    int horizon = 0;
    /// Native units.
    double estimate = 0;
    double lo = 0;
    double hi = 0;
    bool significant = false;
    /// Standardized-unit intermediates.
    double beta_raw = 0;
    double se_raw = 0;
    double beta_rw1 = 0;
    double se_rw1 = 0;
    double critical = 0;
    double scale = 1;
};

struct IrfSurface
{
    std::string basket;
    std::vector<SurfaceCell> cells;
    std::size_t replicates = 0;
    std::size_t dropped_statistics = 0;
    std::size_t ridge_fallbacks = 0;
    double mean_block_length = 0;
    int k_max = 0;

    const SurfaceCell* find(const std::string& predictor, const std::string& target, int horizon) const;
};

/// Raw per-horizon coefficients (standardized) before smoothing:
/// beta[h] and se[h] are P x K, intercept excluded.
struct RawPaths
{
    std::vector<Eigen::MatrixXd> beta;
    std::vector<Eigen::MatrixXd> se;
    std::vector<Eigen::MatrixXd> intercept;
    bool ridge = false;
};

RawPaths estimate_raw(const LpDesign& design, const std::vector<Eigen::Index>* rows = nullptr);

/// Smooths every (p, k) path across horizons; returns P x K matrices per
/// horizon for estimates and errors.
void smooth_paths(const RawPaths& raw, std::span<const int> horizons, double lambda,
                  std::vector<Eigen::MatrixXd>& b, std::vector<Eigen::MatrixXd>& s);

/// Studentized k-max band from bootstrap replicates: for each (p, k) the
/// critical value is the type-7 `level` quantile of the k_max-th largest
/// |t| across horizons. Non-finite statistics are dropped and counted.
struct BandInputs
{
    std::vector<Eigen::MatrixXd> b;
    std::vector<Eigen::MatrixXd> s;
    /// replicate_b[r][h], replicate_s[r][h]
    std::vector<std::vector<Eigen::MatrixXd>> replicate_b;
    std::vector<std::vector<Eigen::MatrixXd>> replicate_s;
};

struct Critical
{
    Eigen::MatrixXd c;
    std::size_t dropped = 0;
    int k_max = 0;
};

Critical critical_values(const BandInputs& in, double level = 0.95);

/// Full local-projection surface: OLS + HC1 per horizon, RW1 smoothing,
/// stationary pairs bootstrap on shared time indices, k-max bands and
/// native-unit scaling. Intercepts are not smoothed.
IrfSurface estimate_surface(const LpDesign& design, const IrfConfig& config);

void write_surface_csv(const std::filesystem::path& path, const std::vector<IrfSurface>& surfaces);
void write_surface_detail_csv(const std::filesystem::path& path, const std::vector<IrfSurface>& surfaces);
/// Reads the basket,predictor,target,horizon,estimate,lo,hi,significant
/// schema; extra columns are ignored.
std::vector<SurfaceCell> read_surface_csv(const std::filesystem::path& path);

struct RankedEffect
{
    std::string basket;
    std::string predictor;
    std::string target;
    int horizon = 0;
    double estimate = 0;
};

struct StabilityRank
{
    std::string predictor;
    int baskets = 0;
    double mean_abs = 0;
    double max_abs = 0;
};

struct Rankings
{
    /// (basket, horizon) -> top significant effects by |estimate|.
    std::map<std::pair<std::string, int>, std::vector<RankedEffect>> top_effects;
    /// (horizon, target) -> predictors by significant-basket count, then
    /// mean |estimate|, then max |estimate|.
    std::map<std::pair<int, std::string>, std::vector<StabilityRank>> cross_basket;
};

Rankings rank_effects(const std::vector<SurfaceCell>& cells, std::size_t top_effects = 8,
                      std::size_t top_predictors = 4);

void write_rankings_json(const std::filesystem::path& path, const Rankings& rankings);

struct AgreementSummary
{
    std::size_t count = 0;
    std::size_t sign_comparable = 0;
    double sign_match = 0;
    double overlap = 0;
    double significance_a = 0;
    double significance_b = 0;
    std::optional<double> sign_match_a_significant;
    std::optional<double> sign_match_both_significant;
};

/// Keys are (basket, predictor, target, horizon) and must coincide. Exact
/// zero estimates are left out of sign-match denominators.
AgreementSummary compare_surfaces(const std::vector<SurfaceCell>& a, const std::vector<SurfaceCell>& b);

void write_agreement_json(const std::filesystem::path& path, const AgreementSummary& s);

} // namespace hodl::irf
