#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace edr {

/// Minimal comma-separated writer. Fields are never quoted, so callers keep
/// commas and newlines out of text columns.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns);

    CsvWriter& field(const std::string& text);
    CsvWriter& field(double value);
    CsvWriter& field(long long value);
    CsvWriter& field(int value) { return field(static_cast<long long>(value)); }
    CsvWriter& field(std::size_t value) { return field(static_cast<long long>(value)); }
    CsvWriter& field(const std::optional<double>& value);
    void end_row();

private:
    std::ofstream out_;
    std::size_t n_columns_;
    std::size_t in_row_ = 0;
};

/// Shortest round-trip decimal representation of `value`.
std::string format_double(double value);

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    /// Index of `name` in `columns`; throws DataError when absent.
    std::size_t column(const std::string& name) const;
    std::optional<std::size_t> find_column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Parses a numeric cell; DataError names the column on failure.
double parse_cell_double(const std::string& cell, const std::string& column);
long long parse_cell_int(const std::string& cell, const std::string& column);

}  // namespace edr
