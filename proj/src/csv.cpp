#include "edr/csv.hpp"

#include <charconv>
#include <sstream>

#include "edr/common.hpp"

namespace edr {

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
    : out_(path, std::ios::binary), n_columns_(columns.size()) {
    if (!out_) throw DataError("cannot open '" + path.string() + "' for writing");
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
}

CsvWriter& CsvWriter::field(const std::string& text) {
    if (in_row_++) out_ << ',';
    out_ << text;
    return *this;
}

CsvWriter& CsvWriter::field(double value) { return field(format_double(value)); }

CsvWriter& CsvWriter::field(long long value) { return field(std::to_string(value)); }

CsvWriter& CsvWriter::field(const std::optional<double>& value) {
    return value ? field(*value) : field(std::string{});
}

void CsvWriter::end_row() {
    if (in_row_ != n_columns_)
        throw std::logic_error("csv row has " + std::to_string(in_row_) + " fields, expected " +
                               std::to_string(n_columns_));
    out_ << '\n';
    in_row_ = 0;
    if (!out_) throw DataError("csv write failed");
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::size_t CsvTable::column(const std::string& name) const {
    if (auto i = find_column(name)) return *i;
    throw DataError("csv is missing column '" + name + "'");
}

std::optional<std::size_t> CsvTable::find_column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    return std::nullopt;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    table.columns = split_line(line);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto row = split_line(line);
        if (row.size() != table.columns.size())
            throw DataError("'" + path.string() + "': row with " + std::to_string(row.size()) + " fields, header has " +
                            std::to_string(table.columns.size()));
        table.rows.push_back(std::move(row));
    }
    return table;
}

double parse_cell_double(const std::string& cell, const std::string& column) {
    double v = 0;
    const auto* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw DataError("column '" + column + "': not a number: '" + cell + "'");
    return v;
}

long long parse_cell_int(const std::string& cell, const std::string& column) {
    long long v = 0;
    const auto* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw DataError("column '" + column + "': not an integer: '" + cell + "'");
    return v;
}

}  // namespace edr
