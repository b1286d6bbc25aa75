#include "csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cnhpp/error.hpp"

namespace cnhpp::detail {

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  CsvTable table;
  table.path = path;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(table.header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.lines.push_back(lineno);
  }
  if (!have_header) throw InputError(path.string() + ": missing header row");
  return table;
}

bool CsvTable::has_column(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

std::size_t CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw InputError(path.string() + ": missing required column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::string CsvTable::where(std::size_t row) const {
  return path.string() + ":" + std::to_string(lines.at(row));
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const auto& s = rows.at(row).at(col);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw InputError(where(row) + ": column '" + header[col] + "' is not a finite number: '" + s + "'");
  }
  return v;
}

long long CsvTable::integer(std::size_t row, std::size_t col) const {
  const auto& s = rows.at(row).at(col);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InputError(where(row) + ": column '" + header[col] + "' is not an integer: '" + s + "'");
  }
  return v;
}

}  // namespace cnhpp::detail
