#include "socshape/csv.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "socshape/errors.hpp"

namespace socshape::csv {

std::string format_number(double v) {
  if (v == 0.0) return "0";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(12) << v;
  return os.str();
}

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw InputError("csv: missing column '" + name + "'");
}

double Table::number(std::size_t row, std::size_t col) const {
  const std::string& cell = rows.at(row).at(col);
  std::istringstream is(cell);
  is.imbue(std::locale::classic());
  double v = 0.0;
  if (!(is >> v)) throw InputError("csv: not a number: '" + cell + "'");
  return v;
}

namespace {

void write_line(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << cells[i];
  }
  os << '\n';
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void write(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  write_line(out, table.header);
  for (const auto& row : table.rows) write_line(out, row);
  if (!out) throw InputError("write failed: " + path.string());
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty csv: " + path.string());
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) throw InputError("ragged csv row in " + path.string());
    t.rows.push_back(std::move(cells));
  }
  return t;
}

}  // namespace socshape::csv
