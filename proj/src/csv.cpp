#include "stdagcn/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stdagcn/error.hpp"

namespace stdagcn::csv {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool looks_numeric(std::string_view cell) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  return ec == std::errc() && ptr == cell.data() + cell.size();
}

}  // namespace

std::vector<Row> read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Row> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    Row row;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      row.emplace_back(trim(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write(const std::filesystem::path& path, const std::vector<Row>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::string format(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

double parse_number(std::string_view cell, const std::filesystem::path& path, std::size_t row,
                    std::size_t col) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    std::ostringstream os;
    os << path.string() << ": row " << row << ", column " << col << ": not a number: '" << cell
       << "'";
    throw ParseError(os.str());
  }
  return v;
}

LabeledMatrix read_matrix(const std::filesystem::path& path) {
  auto rows = read(path);
  if (rows.empty()) throw ParseError(path.string() + ": empty matrix file");
  LabeledMatrix out;
  std::size_t first_row = 0;
  std::size_t first_col = 0;
  const bool header = !rows[0].empty() && (rows[0][0].empty() || !looks_numeric(rows[0][0]) ||
                                           (rows[0].size() > 1 && !looks_numeric(rows[0][1])));
  if (header) {
    first_row = 1;
    first_col = 1;
    out.names.assign(rows[0].begin() + 1, rows[0].end());
  }
  const std::size_t n = rows.size() - first_row;
  out.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = rows[r + first_row];
    if (row.size() != n + first_col) {
      throw ParseError(path.string() + ": row " + std::to_string(r + first_row + 1) + " has " +
                       std::to_string(row.size()) + " cells, expected " +
                       std::to_string(n + first_col) + " for a square matrix");
    }
    for (std::size_t c = 0; c < n; ++c) {
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_number(row[c + first_col], path, r + first_row + 1, c + first_col + 1);
    }
  }
  if (header && out.names.size() != n) {
    throw ParseError(path.string() + ": header names do not match the matrix size");
  }
  return out;
}

void write_matrix(const std::filesystem::path& path, const Matrix& values,
                  const std::vector<std::string>& names) {
  const auto n = static_cast<std::size_t>(values.rows());
  std::vector<Row> rows;
  Row header{""};
  for (std::size_t i = 0; i < n; ++i) header.push_back(i < names.size() ? names[i] : "node_" + std::to_string(i));
  rows.push_back(header);
  for (std::size_t r = 0; r < n; ++r) {
    Row row{header[r + 1]};
    for (std::size_t c = 0; c < static_cast<std::size_t>(values.cols()); ++c) {
      row.push_back(format(values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
    }
    rows.push_back(std::move(row));
  }
  write(path, rows);
}

}  // namespace stdagcn::csv
