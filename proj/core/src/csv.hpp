#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace cnhpp::detail {

// Minimal comma-separated reader: header row required, no quoting, blank
// lines skipped, surrounding whitespace trimmed.
struct CsvTable {
  std::filesystem::path path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based source line of each row

  // Throws InputError if the column is absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;

  double number(std::size_t row, std::size_t col) const;
  long long integer(std::size_t row, std::size_t col) const;
  std::string where(std::size_t row) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace cnhpp::detail
