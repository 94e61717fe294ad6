#include "dhnplan/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dhnplan/error.hpp"

namespace dhnplan::csv {

namespace {

std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  for (auto& cell : out) {
    auto b = cell.find_first_not_of(" \t");
    auto e = cell.find_last_not_of(" \t");
    cell = b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1);
  }
  return out;
}

}  // namespace

Table Table::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string(), "missing file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

Table Table::parse(std::string_view text, std::string source_name) {
  Table t;
  t.source_ = std::move(source_name);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  // strip UTF-8 BOM
  if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto rec = split_record(line);
    if (t.header_.empty()) {
      t.header_ = std::move(rec);
      continue;
    }
    if (rec.size() != t.header_.size()) {
      throw ValidationError(t.source_ + ":" + std::to_string(line_no),
                            "expected " + std::to_string(t.header_.size()) + " fields, got " +
                                std::to_string(rec.size()));
    }
    t.cells_.push_back(std::move(rec));
    t.lines_.push_back(line_no);
  }
  if (t.header_.empty()) throw ValidationError(t.source_, "empty file (no header row)");
  return t;
}

std::optional<std::size_t> Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return i;
  return std::nullopt;
}

std::size_t Table::require_column(std::string_view name) const {
  auto c = column(name);
  if (!c) throw ValidationError(source_, "missing column '" + std::string(name) + "'");
  return *c;
}

std::string Table::get(std::size_t row, std::string_view name) const {
  auto c = column(name);
  return c ? cells_.at(row).at(*c) : std::string{};
}

std::string Table::locus(std::size_t row) const {
  return source_ + ":" + std::to_string(lines_.at(row));
}

double parse_double(const std::string& cell, const std::string& locus, std::string_view field) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc{} || ptr != last || !std::isfinite(v)) {
    throw ValidationError(locus, "field '" + std::string(field) + "' is not a finite number: '" +
                                     cell + "'");
  }
  return v;
}

std::optional<double> parse_optional_double(const std::string& cell, const std::string& locus,
                                            std::string_view field) {
  if (cell.empty()) return std::nullopt;
  return parse_double(cell, locus, field);
}

std::string format_double(double value) {
  if (value == 0.0) return "0";  // folds -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string(), "missing file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dhnplan::csv
