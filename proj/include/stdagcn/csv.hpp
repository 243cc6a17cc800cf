#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "stdagcn/matrix.hpp"

namespace stdagcn::csv {

using Row = std::vector<std::string>;

// Comma-separated cells, whitespace-trimmed; blank lines are skipped.
std::vector<Row> read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const std::vector<Row>& rows);

// Shortest decimal form that parses back to the identical double.
std::string format(double value);

// Throws ParseError naming the file, 1-based row and column on failure.
double parse_number(std::string_view cell, const std::filesystem::path& path, std::size_t row,
                    std::size_t col);

struct LabeledMatrix {
  Matrix values;
  std::vector<std::string> names;  // empty when the file had no header
};

// Square grid, optionally framed by a header row and a leading name column.
LabeledMatrix read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Matrix& values,
                  const std::vector<std::string>& names);

}  // namespace stdagcn::csv
