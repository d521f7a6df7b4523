#pragma once

#include "crtb/types.hpp"

#include <string>
#include <vector>

namespace crtb {

// Delimited numeric table: one header row of unique names, then rectangular
// rows of finite reals.
struct Table {
  std::vector<std::string> names;
  Matrix values;
};

Table read_table(const std::string& path, char delim = ',');

// Doubles are written in shortest round-trip form, so read_table(write_table)
// reproduces the matrix bit-for-bit.
void write_table(const std::string& path, const std::vector<std::string>& names,
                 const Matrix& values, char delim = ',');

void write_int_table(const std::string& path,
                     const std::vector<std::string>& names,
                     const IntMatrix& values, char delim = ',');

std::string format_double(double v);

}  // namespace crtb
