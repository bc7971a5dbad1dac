#include "edr/common.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

namespace edr {

std::string format_iso(Timestamp t) {
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const auto ms_of_day = (t - day).count();
    const long long h = ms_of_day / 3'600'000;
    const long long m = (ms_of_day / 60'000) % 60;
    const long long s = (ms_of_day / 1000) % 60;
    const long long ms = ms_of_day % 1000;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()), h, m, s, ms);
    return buf;
}

namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t len) {
    if (pos + len > text.size()) throw DataError("timestamp too short: '" + std::string(text) + "'");
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
    if (ec != std::errc{} || ptr != text.data() + pos + len)
        throw DataError("bad timestamp field in '" + std::string(text) + "'");
    return value;
}

}  // namespace

Timestamp parse_iso(std::string_view text) {
    using namespace std::chrono;
    // YYYY-MM-DDTHH:MM:SS
    if (text.size() < 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
        text[13] != ':' || text[16] != ':')
        throw DataError("malformed ISO timestamp: '" + std::string(text) + "'");
    const year_month_day ymd{year{read_int(text, 0, 4)}, month{unsigned(read_int(text, 5, 2))},
                             day{unsigned(read_int(text, 8, 2))}};
    if (!ymd.ok()) throw DataError("invalid calendar date: '" + std::string(text) + "'");
    const int h = read_int(text, 11, 2), mi = read_int(text, 14, 2), s = read_int(text, 17, 2);
    if (h > 23 || mi > 59 || s > 60) throw DataError("invalid time of day: '" + std::string(text) + "'");
    long long ms = 0;
    std::size_t pos = 19;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        int digits = 0;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            if (digits < 3) ms = ms * 10 + (text[pos] - '0');
            ++digits;
            ++pos;
        }
        if (digits == 0) throw DataError("empty fractional seconds: '" + std::string(text) + "'");
        for (; digits < 3; ++digits) ms *= 10;
    }
    if (pos < text.size() && text[pos] == 'Z') ++pos;
    if (pos != text.size()) throw DataError("trailing characters in timestamp: '" + std::string(text) + "'");
    return time_point_cast<Milliseconds>(sys_days{ymd}) + hours{h} + minutes{mi} + std::chrono::seconds{s} +
           Milliseconds{ms};
}

std::uint64_t stable_hash(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

}  // namespace edr
