#pragma once

#include <hodl/simulator.hpp>

#include <filesystem>

namespace hodl::sim {

// Binary columnar layout (little-endian), version 1:
//
//   char[8]  magic "HODLEPB1"
//   u32      version
//   u32      interval lower, u32 interval upper
//   i64      calendar start (days since 1970-01-01)
//   u64      episode count n
//   u64      attempts, u64 discarded, u64 rejected
//   u8       complete flag, u8[7] padding
//   string   basket            (u32 length + bytes)
//   u32      symbol count, then each symbol as a string
//   u32[n]   coin, buy_day, sell_day, holding_days  (one column each)
//   f64[n]   p_buy, p_sell, net_return, rf_return, excess_return
void write_episodes_binary(const std::filesystem::path& path, const EpisodeBatch& batch);
EpisodeBatch read_episodes_binary(const std::filesystem::path& path);

/// One row per episode: coin,symbol,buy_day,sell_day,holding_days,buy_date,
/// sell_date,p_buy,p_sell,net_return,rf_return,excess_return.
void write_episodes_csv(const std::filesystem::path& path, const EpisodeBatch& batch);

/// File stem for a (basket, interval) pair, e.g. "ALL_731-1095".
std::string episode_file_stem(const std::string& basket, const HorizonInterval& interval);

} // namespace hodl::sim
