#include <hodl/stationarity.hpp>

#include <hodl/csv.hpp>

#include <array>
#include <stdexcept>

namespace hodl::features {

std::string_view to_string(UnitRootOutcome o)
{
    switch (o) {
    case UnitRootOutcome::stationary: return "STATIONARY";
    case UnitRootOutcome::unit_root: return "UNIT_ROOT";
    case UnitRootOutcome::ambiguous: return "AMBIGUOUS";
    }
    return "?";
}

std::string_view to_string(TransformTag t)
{
    switch (t) {
    case TransformTag::level: return "LEVEL";
    case TransformTag::trend: return "TREND";
    case TransformTag::rw: return "RW";
    }
    return "?";
}

UnitRootOutcome decide_stationarity(double dfgls_p, double kpss_p, double za_p, double level)
{
    for (double p : {dfgls_p, kpss_p, za_p}) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p-value outside [0, 1]");
    }
    if (dfgls_p < level && za_p < level && kpss_p > level) return UnitRootOutcome::stationary;
    if (dfgls_p >= level && za_p >= level && kpss_p <= level) return UnitRootOutcome::unit_root;
    return UnitRootOutcome::ambiguous;
}

TransformTag tag_from_decisions(UnitRootOutcome constant_only, UnitRootOutcome with_trend)
{
    if (constant_only == UnitRootOutcome::stationary) return TransformTag::level;
    if (with_trend == UnitRootOutcome::stationary) return TransformTag::trend;
    return TransformTag::rw;
}

TransformTag resolve_global_tag(std::span<const TransformTag> tags)
{
    if (tags.empty()) throw std::invalid_argument("resolve_global_tag: no tags");
    std::array<int, 3> counts{};
    for (auto t : tags) ++counts[static_cast<std::size_t>(t)];
    // Scan in tie-break priority so the first maximum wins.
    constexpr std::array priority{TransformTag::rw, TransformTag::trend, TransformTag::level};
    TransformTag best = priority[0];
    for (auto t : priority) {
        if (counts[static_cast<std::size_t>(t)] > counts[static_cast<std::size_t>(best)]) best = t;
    }
    return best;
}

std::vector<StationarityRecord> read_stationarity_csv(const std::filesystem::path& path)
{
    const auto t = csv::read(path);
    const auto cs = t.column("series"), cspec = t.column("spec"), cd = t.column("dfgls_p"),
               ck = t.column("kpss_p"), cz = t.column("za_p");
    if (!cs || !cspec || !cd || !ck || !cz) {
        throw std::runtime_error(path.string() + ": expected series,spec,dfgls_p,kpss_p,za_p");
    }
    std::vector<StationarityRecord> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        auto num = [&](std::size_t c) {
            auto v = c < row.size() ? csv::parse_number(row[c]) : std::nullopt;
            if (!v) throw std::runtime_error(path.string() + ": row " + std::to_string(r + 1) + ": bad p-value");
            return *v;
        };
        StationarityRecord rec{row.at(*cs), row.at(*cspec), num(*cd), num(*ck), num(*cz)};
        if (rec.spec != "c" && rec.spec != "ct") {
            throw std::runtime_error(path.string() + ": spec must be c or ct, got " + rec.spec);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

TransformTag SeriesDecision::tag() const
{
    return tag_from_decisions(constant_only.value_or(UnitRootOutcome::ambiguous),
                              with_trend.value_or(UnitRootOutcome::ambiguous));
}

std::map<std::string, SeriesDecision> decide_all(const std::vector<StationarityRecord>& records)
{
    std::map<std::string, SeriesDecision> out;
    for (const auto& r : records) {
        const auto outcome = decide_stationarity(r.dfgls_p, r.kpss_p, r.za_p);
        auto& d = out[r.series];
        (r.spec == "c" ? d.constant_only : d.with_trend) = outcome;
    }
    return out;
}

} // namespace hodl::features
