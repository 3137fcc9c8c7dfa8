#include <hodl/episode_io.hpp>

#include <hodl/csv.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hodl::sim {

static_assert(std::endian::native == std::endian::little, "episode files are little-endian");

namespace {

constexpr char magic[8] = {'H', 'O', 'D', 'L', 'E', 'P', 'B', '1'};
constexpr std::uint32_t format_version = 1;

template <class T>
void put(std::ofstream& out, const T& v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ofstream& out, const std::string& s)
{
    put(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
void put_column(std::ofstream& out, const std::vector<T>& v)
{
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
T get(std::ifstream& in)
{
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("episode file truncated");
    return v;
}

std::string get_string(std::ifstream& in)
{
    const auto n = get<std::uint32_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw std::runtime_error("episode file truncated");
    return s;
}

template <class T>
void get_column(std::ifstream& in, std::vector<T>& v, std::size_t n)
{
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    if (!in) throw std::runtime_error("episode file truncated");
}

} // namespace

void write_episodes_binary(const std::filesystem::path& path, const EpisodeBatch& batch)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(magic, sizeof magic);
    put(out, format_version);
    put(out, static_cast<std::uint32_t>(batch.interval.lower));
    put(out, static_cast<std::uint32_t>(batch.interval.upper));
    put(out, static_cast<std::int64_t>(batch.calendar_start.time_since_epoch().count()));
    put(out, static_cast<std::uint64_t>(batch.size()));
    put(out, batch.attempts);
    put(out, batch.discarded);
    put(out, batch.rejected);
    const std::uint8_t flags[8] = {static_cast<std::uint8_t>(batch.complete ? 1 : 0)};
    out.write(reinterpret_cast<const char*>(flags), sizeof flags);
    put_string(out, batch.basket);
    put(out, static_cast<std::uint32_t>(batch.symbols.size()));
    for (const auto& s : batch.symbols) put_string(out, s);
    put_column(out, batch.coin);
    put_column(out, batch.buy_day);
    put_column(out, batch.sell_day);
    put_column(out, batch.holding_days);
    put_column(out, batch.p_buy);
    put_column(out, batch.p_sell);
    put_column(out, batch.net_return);
    put_column(out, batch.rf_return);
    put_column(out, batch.excess_return);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

EpisodeBatch read_episodes_binary(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    char head[8];
    in.read(head, sizeof head);
    if (!in || std::memcmp(head, magic, sizeof magic) != 0) {
        throw std::runtime_error(path.string() + ": not an episode file");
    }
    if (get<std::uint32_t>(in) != format_version) {
        throw std::runtime_error(path.string() + ": unsupported episode file version");
    }
    EpisodeBatch b;
    b.interval.lower = static_cast<int>(get<std::uint32_t>(in));
    b.interval.upper = static_cast<int>(get<std::uint32_t>(in));
    b.calendar_start = Date{std::chrono::days{get<std::int64_t>(in)}};
    const auto n = static_cast<std::size_t>(get<std::uint64_t>(in));
    b.attempts = get<std::uint64_t>(in);
    b.discarded = get<std::uint64_t>(in);
    b.rejected = get<std::uint64_t>(in);
    std::uint8_t flags[8];
    in.read(reinterpret_cast<char*>(flags), sizeof flags);
    b.complete = flags[0] != 0;
    b.basket = get_string(in);
    const auto n_symbols = get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_symbols; ++i) b.symbols.push_back(get_string(in));
    get_column(in, b.coin, n);
    get_column(in, b.buy_day, n);
    get_column(in, b.sell_day, n);
    get_column(in, b.holding_days, n);
    get_column(in, b.p_buy, n);
    get_column(in, b.p_sell, n);
    get_column(in, b.net_return, n);
    get_column(in, b.rf_return, n);
    get_column(in, b.excess_return, n);
    return b;
}

void write_episodes_csv(const std::filesystem::path& path, const EpisodeBatch& batch)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "coin,symbol,buy_day,sell_day,holding_days,buy_date,sell_date,p_buy,p_sell,net_return,"
           "rf_return,excess_return\n";
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto c = batch.coin[i];
        out << c << ',' << (c < batch.symbols.size() ? batch.symbols[c] : std::string{}) << ','
            << batch.buy_day[i] << ',' << batch.sell_day[i] << ',' << batch.holding_days[i] << ','
            << format_date(batch.calendar_start + std::chrono::days{batch.buy_day[i]}) << ','
            << format_date(batch.sell_date(i)) << ',' << csv::format_number(batch.p_buy[i]) << ','
            << csv::format_number(batch.p_sell[i]) << ',' << csv::format_number(batch.net_return[i]) << ','
            << csv::format_number(batch.rf_return[i]) << ',' << csv::format_number(batch.excess_return[i])
            << '\n';
    }
}

std::string episode_file_stem(const std::string& basket, const HorizonInterval& interval)
{
    return basket + "_" + interval.label();
}

} // namespace hodl::sim
