#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace socshape::csv {

/// 12 significant digits, '.' separator, no negative zero.
std::string format_number(double v);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row) { rows.push_back(std::move(row)); }
  /// Index of a header column; throws InputError if missing.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, std::size_t col) const;
};

void write(const std::filesystem::path& path, const Table& table);
Table read(const std::filesystem::path& path);

}  // namespace socshape::csv
