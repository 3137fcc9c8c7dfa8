#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace hodl {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stable 64-bit id for a label (FNV-1a), used to key streams by name.
constexpr std::uint64_t label_id(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Counter-based stream generator. A stream is fully determined by its key,
/// and the i-th output is mix64(key + (i+1)*gamma), so any (seed, ids...)
/// tuple addresses an independent, reproducible stream without shared state.
class CounterRng
{
public:
    using result_type = std::uint64_t;

    explicit constexpr CounterRng(std::uint64_t key) noexcept : _state(key) {}

    /// Stream keyed by a seed and an ordered list of ids (basket, interval,
    /// ordinal, ...).
    static constexpr CounterRng stream(std::uint64_t seed,
                                       std::initializer_list<std::uint64_t> ids) noexcept
    {
        std::uint64_t key = mix64(seed ^ 0x6a09e667f3bcc909ULL);
        for (auto id : ids) key = mix64(key ^ mix64(id + 0x9e3779b97f4a7c15ULL));
        return CounterRng{key};
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept
    {
        _state += 0x9e3779b97f4a7c15ULL;
        return mix64(_state);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() noexcept { return double((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer on the inclusive range [lo, hi]; unbiased (Lemire).
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) noexcept
    {
        const std::uint64_t range = hi - lo;
        if (range == std::numeric_limits<std::uint64_t>::max()) return (*this)();
        const std::uint64_t span = range + 1;
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * span;
        auto low = static_cast<std::uint64_t>(m);
        if (low < span) {
            const std::uint64_t threshold = -span % span;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * span;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return lo + static_cast<std::uint64_t>(m >> 64);
    }

private:
    std::uint64_t _state;
};

} // namespace hodl
