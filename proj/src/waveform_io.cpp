#include "edr/waveform_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "edr/csv.hpp"

namespace edr {

namespace {

std::vector<std::string> tokenize(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) out.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
    T value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

[[noreturn]] void header_error(int line_no, const std::string& field, const std::string& what) {
    throw DataError("header line " + std::to_string(line_no) + ", field '" + field + "': " + what);
}

// "HH:MM:SS[.sss]" and optional "DD/MM/YYYY".
std::optional<Timestamp> parse_base_time(const std::vector<std::string>& tok, std::size_t at, int line_no) {
    if (tok.size() <= at) return std::nullopt;
    const std::string& clock = tok[at];
    int h = 0, m = 0;
    double s = 0;
    if (std::sscanf(clock.c_str(), "%d:%d:%lf", &h, &m, &s) != 3) header_error(line_no, "base_time", "expected HH:MM:SS");
    std::string date = "01/01/1970";
    if (tok.size() > at + 1) date = tok[at + 1];
    int dd = 0, mo = 0, yy = 0;
    if (std::sscanf(date.c_str(), "%d/%d/%d", &dd, &mo, &yy) != 3) header_error(line_no, "base_date", "expected DD/MM/YYYY");
    char iso[64];
    std::snprintf(iso, sizeof iso, "%04d-%02d-%02dT%02d:%02d:00Z", yy, mo, dd, h, m);
    return parse_iso(iso) + seconds_ms(s);
}

SampleFormat parse_format(const std::string& token, int line_no, SignalSpec& spec) {
    std::size_t i = 0;
    while (i < token.size() && std::isdigit(static_cast<unsigned char>(token[i]))) ++i;
    auto code = parse_number<int>(std::string_view(token).substr(0, i));
    if (!code) header_error(line_no, "format", "missing format code in '" + token + "'");
    // Optional suffixes: xN samples per frame, :skew, +byte offset.
    std::string_view rest = std::string_view(token).substr(i);
    while (!rest.empty()) {
        const char tag = rest.front();
        std::size_t j = 1;
        while (j < rest.size() && std::isdigit(static_cast<unsigned char>(rest[j]))) ++j;
        auto value = parse_number<std::int64_t>(rest.substr(1, j - 1));
        if (!value) header_error(line_no, "format", "bad modifier in '" + token + "'");
        if (tag == 'x' && *value != 1) header_error(line_no, "format", "multiple samples per frame are unsupported");
        if (tag == '+') spec.byte_offset = *value;
        if (tag != 'x' && tag != ':' && tag != '+') header_error(line_no, "format", "bad modifier in '" + token + "'");
        rest = rest.substr(j);
    }
    if (*code != 16 && *code != 212)
        header_error(line_no, "format", "unsupported format " + std::to_string(*code) + " (only 16 and 212)");
    return static_cast<SampleFormat>(*code);
}

void parse_gain(const std::string& token, int line_no, SignalSpec& spec, bool& has_baseline) {
    std::string_view t = token;
    std::string_view units;
    if (auto slash = t.find('/'); slash != std::string_view::npos) {
        units = t.substr(slash + 1);
        t = t.substr(0, slash);
    }
    if (auto open = t.find('('); open != std::string_view::npos) {
        auto close = t.find(')', open);
        if (close == std::string_view::npos) header_error(line_no, "baseline", "unbalanced parenthesis in '" + token + "'");
        auto b = parse_number<std::int32_t>(t.substr(open + 1, close - open - 1));
        if (!b) header_error(line_no, "baseline", "not an integer in '" + token + "'");
        spec.baseline = *b;
        has_baseline = true;
        t = t.substr(0, open);
    }
    auto g = parse_number<double>(t);
    if (!g || !std::isfinite(*g)) header_error(line_no, "gain", "not a number: '" + token + "'");
    if (*g == 0.0) header_error(line_no, "gain", "zero gain");
    spec.gain = *g;
    if (!units.empty()) spec.units = std::string(units);
}

}  // namespace

RecordHeader parse_header(std::string_view text) {
    RecordHeader header;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    bool have_record_line = false;
    std::size_t expected_signals = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        const auto tok = tokenize(stripped);
        if (!have_record_line) {
            have_record_line = true;
            if (tok.size() < 2) header_error(line_no, "record", "record line needs a name and a signal count");
            if (tok[0].find('/') != std::string::npos) header_error(line_no, "record", "multi-segment records are unsupported");
            header.record_name = tok[0];
            auto nsig = parse_number<long long>(tok[1]);
            if (!nsig || *nsig < 0) header_error(line_no, "n_signals", "not a count: '" + tok[1] + "'");
            if (*nsig == 0) header_error(line_no, "n_signals", "no signals");
            expected_signals = static_cast<std::size_t>(*nsig);
            if (tok.size() > 2) {
                std::string_view fs = tok[2];
                fs = fs.substr(0, fs.find_first_of("/("));
                auto rate = parse_number<double>(fs);
                if (!rate || !(*rate > 0) || !std::isfinite(*rate))
                    header_error(line_no, "sample_rate", "must be positive: '" + tok[2] + "'");
                header.sample_rate = *rate;
            }
            if (tok.size() > 3) {
                auto n = parse_number<std::int64_t>(tok[3]);
                if (!n || *n < 0) header_error(line_no, "n_samples", "not a count: '" + tok[3] + "'");
                header.n_samples = *n;
            }
            header.base_time = parse_base_time(tok, 4, line_no);
            continue;
        }
        if (header.signals.size() == expected_signals) continue;  // trailing info lines
        SignalSpec spec;
        if (tok.size() < 2) header_error(line_no, "signal", "signal line needs a file name and a format");
        spec.file_name = tok[0];
        spec.format = parse_format(tok[1], line_no, spec);
        bool has_baseline = false;
        if (tok.size() > 2) parse_gain(tok[2], line_no, spec, has_baseline);
        // tok[3] = adc resolution, tok[4] = adc zero, tok[5..7] = initval, checksum, blocksize
        if (tok.size() > 4 && !has_baseline) {
            auto zero = parse_number<std::int32_t>(tok[4]);
            if (!zero) header_error(line_no, "adc_zero", "not an integer: '" + tok[4] + "'");
            spec.baseline = *zero;
        }
        if (tok.size() > 8) {
            // Description runs to the end of the line, verbatim.
            std::size_t pos = 0;
            for (int k = 0; k < 8; ++k) {
                pos = stripped.find(tok[static_cast<std::size_t>(k)], pos) + tok[static_cast<std::size_t>(k)].size();
            }
            spec.lead_name = trim(std::string_view(stripped).substr(pos));
        } else {
            spec.lead_name = "sig" + std::to_string(header.signals.size());
        }
        if (spec.units == "uV") {
            spec.gain *= 1000.0;
            spec.units = "mV";
        }
        header.signals.push_back(std::move(spec));
    }
    if (!have_record_line) throw DataError("header has no record line");
    if (header.signals.size() != expected_signals)
        throw DataError("header declares " + std::to_string(expected_signals) + " signals but has " +
                        std::to_string(header.signals.size()) + " signal lines");
    return header;
}

std::string format_header(const RecordHeader& header) {
    std::ostringstream out;
    out << header.record_name << ' ' << header.n_signals() << ' ' << format_double(header.sample_rate) << ' '
        << header.n_samples;
    if (header.base_time) {
        using namespace std::chrono;
        const auto day = floor<days>(*header.base_time);
        const year_month_day ymd{day};
        const auto ms = (*header.base_time - day).count();
        char buf[64];
        std::snprintf(buf, sizeof buf, " %02lld:%02lld:%02lld.%03lld %02u/%02u/%04d", (long long)(ms / 3'600'000),
                      (long long)(ms / 60'000 % 60), (long long)(ms / 1000 % 60), (long long)(ms % 1000),
                      unsigned(ymd.day()), unsigned(ymd.month()), int(ymd.year()));
        out << buf;
    }
    out << '\n';
    for (const auto& s : header.signals) {
        out << s.file_name << ' ' << static_cast<int>(s.format);
        if (s.byte_offset) out << '+' << s.byte_offset;
        out << ' ' << format_double(s.gain) << '(' << s.baseline << ")/" << s.units << ' '
            << (s.format == SampleFormat::Fmt212 ? 12 : 16) << ' ' << s.baseline << " 0 0 0 " << s.lead_name << '\n';
    }
    return out.str();
}

namespace {

std::int32_t sign_extend12(std::uint32_t v) { return (v & 0x800u) ? static_cast<std::int32_t>(v) - 4096 : static_cast<std::int32_t>(v); }

std::size_t fmt212_bytes(std::size_t total) { return total / 2 * 3 + (total % 2 ? 2 : 0); }

}  // namespace

DecodedSamples decode_samples(std::span<const std::uint8_t> bytes, const RecordHeader& header) {
    const std::size_t nsig = header.n_signals();
    if (nsig == 0) throw DataError("no signals");
    const SampleFormat format = header.signals.front().format;
    for (const auto& s : header.signals)
        if (s.format != format) throw DataError("signals of one payload must share a format");

    std::size_t n = static_cast<std::size_t>(header.n_samples);
    if (n == 0) {
        if (format == SampleFormat::Fmt16) {
            if (bytes.size() % (2 * nsig)) throw DataError("payload size is not a whole number of frames");
            n = bytes.size() / (2 * nsig);
        } else {
            if (bytes.size() % 3 == 1) throw DataError("payload size is not valid for format 212");
            const std::size_t total = bytes.size() / 3 * 2 + (bytes.size() % 3 == 2 ? 1 : 0);
            if (total % nsig) throw DataError("payload size is not a whole number of frames");
            n = total / nsig;
        }
    }
    const std::size_t total = n * nsig;
    const std::size_t expected = format == SampleFormat::Fmt16 ? total * 2 : fmt212_bytes(total);
    if (bytes.size() < expected)
        throw DataError("truncated payload: expected " + std::to_string(expected) + " bytes, got " +
                        std::to_string(bytes.size()) + " (short at byte offset " + std::to_string(bytes.size()) + ")");
    if (bytes.size() > expected)
        throw DataError("trailing bytes beyond declared samples starting at byte offset " + std::to_string(expected));

    DecodedSamples out;
    out.samples.assign(nsig, std::vector<std::int32_t>(n));
    out.mask.assign(nsig, std::vector<std::uint8_t>(n, 0));
    auto put = [&](std::size_t k, std::int32_t v, std::int32_t sentinel) {
        const std::size_t sig = k % nsig, i = k / nsig;
        out.samples[sig][i] = v;
        out.mask[sig][i] = v == sentinel;
    };
    if (format == SampleFormat::Fmt16) {
        for (std::size_t k = 0; k < total; ++k) {
            const auto v = static_cast<std::int16_t>(bytes[2 * k] | (bytes[2 * k + 1] << 8));
            put(k, v, -32768);
        }
    } else {
        for (std::size_t k = 0, b = 0; k < total; k += 2, b += 3) {
            const std::uint32_t b0 = bytes[b], b1 = bytes[b + 1];
            put(k, sign_extend12(b0 | ((b1 & 0x0Fu) << 8)), -2048);
            if (k + 1 < total) {
                const std::uint32_t b2 = bytes[b + 2];
                put(k + 1, sign_extend12(b2 | ((b1 & 0xF0u) << 4)), -2048);
            }
        }
    }
    return out;
}

std::vector<std::uint8_t> encode_samples(const DecodedSamples& decoded, SampleFormat format) {
    const std::size_t nsig = decoded.samples.size();
    const std::size_t n = decoded.length();
    const std::size_t total = n * nsig;
    auto value = [&](std::size_t k) -> std::int32_t {
        const std::size_t sig = k % nsig, i = k / nsig;
        const bool masked = i < decoded.mask[sig].size() && decoded.mask[sig][i];
        if (format == SampleFormat::Fmt16) {
            if (masked) return -32768;
            const auto v = decoded.samples[sig][i];
            if (v < -32767 || v > 32767) throw DataError("sample out of range for format 16");
            return v;
        }
        if (masked) return -2048;
        const auto v = decoded.samples[sig][i];
        if (v < -2047 || v > 2047) throw DataError("sample out of range for format 212");
        return v;
    };
    std::vector<std::uint8_t> out;
    if (format == SampleFormat::Fmt16) {
        out.resize(total * 2);
        for (std::size_t k = 0; k < total; ++k) {
            const auto u = static_cast<std::uint16_t>(value(k));
            out[2 * k] = static_cast<std::uint8_t>(u & 0xFF);
            out[2 * k + 1] = static_cast<std::uint8_t>(u >> 8);
        }
    } else {
        out.resize(fmt212_bytes(total));
        for (std::size_t k = 0, b = 0; k < total; k += 2, b += 3) {
            const auto s1 = static_cast<std::uint32_t>(value(k)) & 0xFFFu;
            out[b] = static_cast<std::uint8_t>(s1 & 0xFF);
            std::uint32_t mid = s1 >> 8;
            if (k + 1 < total) {
                const auto s2 = static_cast<std::uint32_t>(value(k + 1)) & 0xFFFu;
                mid |= (s2 >> 8) << 4;
                out[b + 2] = static_cast<std::uint8_t>(s2 & 0xFF);
            }
            out[b + 1] = static_cast<std::uint8_t>(mid);
        }
    }
    return out;
}

double Lead::millivolts(std::size_t i) const {
    if (missing(i)) return std::numeric_limits<double>::quiet_NaN();
    return (static_cast<double>(adu[i]) - baseline) / gain;
}

std::vector<double> Lead::physical() const {
    std::vector<double> out(adu.size());
    for (std::size_t i = 0; i < adu.size(); ++i) out[i] = millivolts(i);
    return out;
}

std::vector<std::uint8_t> Lead::mask() const {
    std::vector<std::uint8_t> out(adu.size());
    for (std::size_t i = 0; i < adu.size(); ++i) out[i] = missing(i);
    return out;
}

std::int32_t to_adu(double mv, double gain, std::int32_t baseline) {
    return static_cast<std::int32_t>(std::llround(mv * gain + baseline));
}

Lead Lead::from_physical(std::string name, std::span<const double> mv, double gain, std::int32_t baseline) {
    if (gain == 0.0 || !std::isfinite(gain)) throw DataError("lead '" + name + "': gain must be finite and nonzero");
    Lead lead{std::move(name), gain, baseline, std::vector<std::int16_t>(mv.size())};
    for (std::size_t i = 0; i < mv.size(); ++i) {
        if (std::isnan(mv[i])) {
            lead.adu[i] = kMissingAdu;
            continue;
        }
        const double scaled = mv[i] * gain + baseline;
        const double clamped = std::clamp(scaled, -32767.0, 32767.0);
        lead.adu[i] = static_cast<std::int16_t>(std::lround(clamped));
    }
    return lead;
}

void WaveformRecord::validate() const {
    if (leads.empty()) throw DataError("record '" + name + "' has no signals");
    if (!(sample_rate > 0) || !std::isfinite(sample_rate)) throw DataError("record '" + name + "': sample rate must be positive");
    for (const auto& lead : leads) {
        if (lead.gain == 0.0 || !std::isfinite(lead.gain)) throw DataError("lead '" + lead.name + "': zero gain");
        if (lead.size() != leads.front().size())
            throw DataError("record '" + name + "': leads have unequal lengths");
    }
}

RecordHeader WaveformRecord::header() const {
    RecordHeader h;
    h.record_name = name;
    h.sample_rate = sample_rate;
    h.n_samples = static_cast<std::int64_t>(n_samples());
    h.base_time = start_time;
    for (const auto& lead : leads) {
        SignalSpec s;
        s.file_name = name + ".dat";
        s.gain = lead.gain;
        s.baseline = lead.baseline;
        s.lead_name = lead.name;
        h.signals.push_back(std::move(s));
    }
    return h;
}

WaveformRecord make_record(const RecordHeader& header, const DecodedSamples& decoded, Timestamp start_time) {
    WaveformRecord record;
    record.name = header.record_name;
    record.patient_id = header.record_name;
    record.sample_rate = header.sample_rate;
    record.start_time = start_time;
    for (std::size_t s = 0; s < header.n_signals(); ++s) {
        const auto& spec = header.signals[s];
        Lead lead{spec.lead_name, spec.gain, spec.baseline, {}};
        lead.adu.resize(decoded.samples[s].size());
        for (std::size_t i = 0; i < lead.adu.size(); ++i) {
            const auto v = decoded.samples[s][i];
            lead.adu[i] = decoded.mask[s][i] ? kMissingAdu : static_cast<std::int16_t>(v);
        }
        record.leads.push_back(std::move(lead));
    }
    record.validate();
    return record;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

namespace {

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write to '" + path.string() + "' failed");
}

std::string read_text(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

}  // namespace

WaveformRecord read_wfdb(const std::filesystem::path& header_path) {
    const RecordHeader header = parse_header(read_text(header_path));
    const std::string& file = header.signals.front().file_name;
    for (const auto& s : header.signals)
        if (s.file_name != file) throw DataError("signals spread over several data files are unsupported");
    auto bytes = read_file_bytes(header_path.parent_path() / file);
    const auto offset = static_cast<std::size_t>(header.signals.front().byte_offset);
    if (offset > bytes.size()) throw DataError("byte offset beyond end of '" + file + "'");
    const auto decoded = decode_samples(std::span(bytes).subspan(offset), header);
    return make_record(header, decoded, header.base_time.value_or(Timestamp{}));
}

std::filesystem::path write_wfdb(const WaveformRecord& record, const std::filesystem::path& dir, SampleFormat format) {
    record.validate();
    RecordHeader header = record.header();
    for (auto& s : header.signals) s.format = format;
    DecodedSamples decoded;
    for (const auto& lead : record.leads) {
        decoded.samples.emplace_back(lead.adu.begin(), lead.adu.end());
        decoded.mask.push_back(lead.mask());
    }
    std::filesystem::create_directories(dir);
    write_bytes(dir / (record.name + ".dat"), encode_samples(decoded, format));
    const auto hea = dir / (record.name + ".hea");
    const std::string text = format_header(header);
    write_bytes(hea, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    return hea;
}

void write_native(const WaveformRecord& record, const std::filesystem::path& path) {
    record.validate();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    nlohmann::json meta;
    meta["format"] = "edr-native";
    meta["version"] = kNativeVersion;
    meta["record_name"] = record.name;
    meta["patient_id"] = record.patient_id;
    meta["sample_rate"] = record.sample_rate;
    meta["start_time_ms"] = epoch_ms(record.start_time);
    meta["start_time"] = format_iso(record.start_time);
    meta["n_samples"] = record.n_samples();
    meta["leads"] = nlohmann::json::array();
    for (std::size_t i = 0; i < record.leads.size(); ++i) {
        const auto& lead = record.leads[i];
        const std::string file = path.stem().string() + ".lead" + std::to_string(i) + ".i16";
        meta["leads"].push_back({{"name", lead.name}, {"gain", lead.gain}, {"baseline", lead.baseline}, {"file", file}});
        std::vector<std::uint8_t> raw(lead.size() * 2);
        for (std::size_t k = 0; k < lead.size(); ++k) {
            const auto u = static_cast<std::uint16_t>(lead.adu[k]);
            raw[2 * k] = static_cast<std::uint8_t>(u & 0xFF);
            raw[2 * k + 1] = static_cast<std::uint8_t>(u >> 8);
        }
        write_bytes(path.parent_path() / file, raw);
    }
    const std::string text = meta.dump(2) + "\n";
    write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

WaveformRecord read_native(const std::filesystem::path& path) {
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
    if (meta.value("format", "") != "edr-native") throw DataError("'" + path.string() + "' is not a native record");
    if (meta.value("version", -1) != kNativeVersion)
        throw DataError("native container version mismatch: file has " + meta.value("version", nlohmann::json(-1)).dump() +
                        ", reader expects " + std::to_string(kNativeVersion));
    WaveformRecord record;
    try {
        record.name = meta.at("record_name").get<std::string>();
        record.patient_id = meta.at("patient_id").get<std::string>();
        record.sample_rate = meta.at("sample_rate").get<double>();
        record.start_time = from_epoch_ms(meta.at("start_time_ms").get<std::int64_t>());
        const auto n = meta.at("n_samples").get<std::size_t>();
        for (const auto& entry : meta.at("leads")) {
            Lead lead{entry.at("name").get<std::string>(), entry.at("gain").get<double>(),
                      entry.at("baseline").get<std::int32_t>(), {}};
            const auto raw = read_file_bytes(path.parent_path() / entry.at("file").get<std::string>());
            if (raw.size() != 2 * n)
                throw DataError("lead file for '" + lead.name + "' holds " + std::to_string(raw.size()) +
                                " bytes, expected " + std::to_string(2 * n));
            lead.adu.resize(n);
            for (std::size_t k = 0; k < n; ++k)
                lead.adu[k] = static_cast<std::int16_t>(raw[2 * k] | (raw[2 * k + 1] << 8));
            record.leads.push_back(std::move(lead));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("'" + path.string() + "': " + e.what());
    }
    record.validate();
    return record;
}

void export_csv(const WaveformRecord& record, const std::filesystem::path& path) {
    CsvWriter csv(path, {"time_s", "lead_name", "mV"});
    for (std::size_t i = 0; i < record.n_samples(); ++i) {
        const double t = static_cast<double>(i) / record.sample_rate;
        for (const auto& lead : record.leads) {
            csv.field(t).field(lead.name);
            if (lead.missing(i))
                csv.field(std::string{});
            else
                csv.field(lead.millivolts(i));
            csv.end_row();
        }
    }
}

}  // namespace edr
