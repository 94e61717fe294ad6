#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dhnplan::csv {

// A parsed comma-separated file with a header row. Row numbers reported in
// errors are 1-based file lines (the header is line 1).
class Table {
 public:
  static Table read(const std::filesystem::path& path);
  static Table parse(std::string_view text, std::string source_name);

  const std::string& source() const noexcept { return source_; }
  const std::vector<std::string>& header() const noexcept { return header_; }
  std::size_t rows() const noexcept { return cells_.size(); }

  std::optional<std::size_t> column(std::string_view name) const;
  std::size_t require_column(std::string_view name) const;

  const std::string& at(std::size_t row, std::size_t col) const { return cells_.at(row).at(col); }
  // Cell by column name; empty string when the column is absent.
  std::string get(std::size_t row, std::string_view name) const;

  // "<file>:<line>" for a data row.
  std::string locus(std::size_t row) const;

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> cells_;
  std::vector<std::size_t> lines_;
};

double parse_double(const std::string& cell, const std::string& locus, std::string_view field);
std::optional<double> parse_optional_double(const std::string& cell, const std::string& locus,
                                            std::string_view field);

// Shortest round-trip decimal form; used everywhere we write numbers.
std::string format_double(double value);

void write_file(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace dhnplan::csv
