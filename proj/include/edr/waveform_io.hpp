#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edr/common.hpp"

namespace edr {

/// Packed sample layouts understood by the reader.
enum class SampleFormat : int { Fmt16 = 16, Fmt212 = 212 };

/// Stored value of a missing sample. Format 212 files use -2048 on disk;
/// decoding maps both sentinels here.
inline constexpr std::int16_t kMissingAdu = std::numeric_limits<std::int16_t>::min();
inline constexpr double kDefaultGain = 200.0;

struct SignalSpec {
    std::string file_name;
    SampleFormat format = SampleFormat::Fmt16;
    double gain = kDefaultGain;  // adu per mV
    std::int32_t baseline = 0;   // adu
    std::string units = "mV";
    std::int64_t byte_offset = 0;
    std::string lead_name;

    bool operator==(const SignalSpec&) const = default;
};

struct RecordHeader {
    std::string record_name;
    double sample_rate = 250.0;
    std::int64_t n_samples = 0;  // 0 when the header leaves it unspecified
    std::optional<Timestamp> base_time;
    std::vector<SignalSpec> signals;

    std::size_t n_signals() const { return signals.size(); }
    bool operator==(const RecordHeader&) const = default;
};

/// Parses a waveform-database header (record line plus one line per signal).
/// Throws DataError naming the offending line and field.
RecordHeader parse_header(std::string_view text);

/// Renders a header that parse_header reads back to an equal RecordHeader.
std::string format_header(const RecordHeader& header);

struct DecodedSamples {
    std::vector<std::vector<std::int32_t>> samples;  // per signal, adu
    std::vector<std::vector<std::uint8_t>> mask;     // 1 = missing

    std::size_t length() const { return samples.empty() ? 0 : samples.front().size(); }
};

/// Decodes a frame-interleaved payload holding every signal of `header`.
/// When header.n_samples is 0 the length is inferred from the payload size.
DecodedSamples decode_samples(std::span<const std::uint8_t> bytes, const RecordHeader& header);

/// Inverse of decode_samples for one uniform format. Masked samples are
/// written as the format's sentinel.
std::vector<std::uint8_t> encode_samples(const DecodedSamples& decoded, SampleFormat format);

struct Lead {
    std::string name;
    double gain = kDefaultGain;
    std::int32_t baseline = 0;
    std::vector<std::int16_t> adu;

    std::size_t size() const { return adu.size(); }
    bool missing(std::size_t i) const { return adu[i] == kMissingAdu; }
    /// (adu - baseline) / gain, NaN where missing.
    double millivolts(std::size_t i) const;
    std::vector<double> physical() const;
    std::vector<std::uint8_t> mask() const;

    /// Quantizes physical values; NaN becomes a missing sample and values
    /// beyond the 16-bit range saturate.
    static Lead from_physical(std::string name, std::span<const double> mv, double gain, std::int32_t baseline = 0);

    bool operator==(const Lead&) const = default;
};

/// Inverse of the physical conversion: round(mv * gain + baseline).
std::int32_t to_adu(double mv, double gain, std::int32_t baseline);

struct WaveformRecord {
    std::string name;
    std::string patient_id;
    double sample_rate = 120.0;
    Timestamp start_time{};
    std::vector<Lead> leads;

    std::size_t n_samples() const { return leads.empty() ? 0 : leads.front().size(); }
    Timestamp time_of(std::size_t sample) const {
        return start_time + seconds_ms(static_cast<double>(sample) / sample_rate);
    }
    /// Throws DataError unless every record invariant holds.
    void validate() const;
    RecordHeader header() const;

    bool operator==(const WaveformRecord&) const = default;
};

/// Builds a record from a parsed header and its decoded payload.
WaveformRecord make_record(const RecordHeader& header, const DecodedSamples& decoded, Timestamp start_time);

/// Reads "<dir>/<record>.hea" and its single data file.
WaveformRecord read_wfdb(const std::filesystem::path& header_path);
/// Writes a header and one data file in `format`; returns the header path.
std::filesystem::path write_wfdb(const WaveformRecord& record, const std::filesystem::path& dir,
                                 SampleFormat format = SampleFormat::Fmt16);

/// Native container: "<stem>.json" metadata plus "<stem>.lead<i>.i16" raw
/// little-endian 16-bit samples per lead. `path` names the JSON file.
inline constexpr int kNativeVersion = 1;
void write_native(const WaveformRecord& record, const std::filesystem::path& path);
WaveformRecord read_native(const std::filesystem::path& path);

/// Long-format export: time_s, lead_name, mV (blank where missing).
void export_csv(const WaveformRecord& record, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace edr
