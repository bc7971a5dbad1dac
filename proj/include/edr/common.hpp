#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace edr {

/// Input that violates a documented format or data contract (CLI exit code 3).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values or an otherwise broken numeric state (CLI exit code 4).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration (CLI exit code 2).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A pipeline step ran before the step that produces its input.
class PrerequisiteError : public std::runtime_error {
public:
    PrerequisiteError(const std::string& artifact, const std::string& producer)
        : std::runtime_error("missing prerequisite artifact '" + artifact + "' (produced by `" + producer + "`)"),
          artifact_(artifact), producer_(producer) {}

    const std::string& artifact() const { return artifact_; }
    const std::string& producer() const { return producer_; }

private:
    std::string artifact_;
    std::string producer_;
};

using Milliseconds = std::chrono::milliseconds;
/// Absolute UTC time with millisecond precision.
using Timestamp = std::chrono::sys_time<Milliseconds>;

inline Timestamp from_epoch_ms(std::int64_t ms) { return Timestamp{Milliseconds{ms}}; }
inline std::int64_t epoch_ms(Timestamp t) { return t.time_since_epoch().count(); }

inline constexpr Milliseconds seconds_ms(double s) {
    return Milliseconds{static_cast<std::int64_t>(s * 1000.0 + (s >= 0 ? 0.5 : -0.5))};
}
inline constexpr Milliseconds kMinute{60'000};
inline constexpr Milliseconds kHour{3'600'000};

/// "YYYY-MM-DDTHH:MM:SS.mmmZ"
std::string format_iso(Timestamp t);
/// Accepts "YYYY-MM-DDTHH:MM:SS[.mmm][Z]" and "YYYY-MM-DD HH:MM:SS[.mmm]".
Timestamp parse_iso(std::string_view text);

/// FNV-1a over the bytes of `text`; stable across platforms and runs.
std::uint64_t stable_hash(std::string_view text);
/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

std::string trim(std::string_view s);

}  // namespace edr
