#include "crtb/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace crtb {

namespace {

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Table read_table(const std::string& path, char delim) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("read_table: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line))
    throw InvalidInputError("read_table: '" + path + "' is empty");
  Table table;
  table.names = split(strip_cr(line), delim);
  if (table.names.empty())
    throw InvalidInputError("read_table: '" + path + "' has an empty header");
  std::set<std::string> seen;
  for (const auto& name : table.names)
    if (!seen.insert(name).second)
      throw InvalidInputError("read_table: duplicate column name '" + name +
                              "' in '" + path + "'");

  const auto cols = static_cast<Index>(table.names.size());
  std::vector<double> data;
  Index rows = 0;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split(line, delim);
    if (static_cast<Index>(fields.size()) != cols)
      throw InvalidInputError(
          "read_table: '" + path + "' line " + std::to_string(line_no) +
          " has " + std::to_string(fields.size()) + " fields, expected " +
          std::to_string(cols));
    for (const auto& field : fields) {
      double value = 0.0;
      const char* begin = field.data();
      const char* end = begin + field.size();
      const auto res = std::from_chars(begin, end, value);
      if (res.ec != std::errc{} || res.ptr != end)
        throw InvalidInputError("read_table: '" + path + "' line " +
                                std::to_string(line_no) +
                                ": cannot parse '" + field + "' as a number");
      if (!std::isfinite(value))
        throw InvalidInputError("read_table: '" + path + "' line " +
                                std::to_string(line_no) +
                                ": non-finite value '" + field + "'");
      data.push_back(value);
    }
    ++rows;
  }

  table.values.resize(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      table.values(i, j) = data[static_cast<size_t>(i * cols + j)];
  return table;
}

namespace {

void write_header(std::ofstream& out, const std::vector<std::string>& names,
                  char delim) {
  for (size_t j = 0; j < names.size(); ++j) {
    if (j > 0) out << delim;
    out << names[j];
  }
  out << '\n';
}

}  // namespace

void write_table(const std::string& path, const std::vector<std::string>& names,
                 const Matrix& values, char delim) {
  require(static_cast<Index>(names.size()) == values.cols(),
          "write_table: header length does not match column count");
  std::ofstream out(path);
  if (!out)
    throw InvalidInputError("write_table: cannot open '" + path +
                            "' for writing");
  write_header(out, names, delim);
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      if (j > 0) out << delim;
      out << format_double(values(i, j));
    }
    out << '\n';
  }
  if (!out)
    throw InvalidInputError("write_table: write to '" + path + "' failed");
}

void write_int_table(const std::string& path,
                     const std::vector<std::string>& names,
                     const IntMatrix& values, char delim) {
  require(static_cast<Index>(names.size()) == values.cols(),
          "write_int_table: header length does not match column count");
  std::ofstream out(path);
  if (!out)
    throw InvalidInputError("write_int_table: cannot open '" + path +
                            "' for writing");
  write_header(out, names, delim);
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      if (j > 0) out << delim;
      out << values(i, j);
    }
    out << '\n';
  }
  if (!out)
    throw InvalidInputError("write_int_table: write to '" + path + "' failed");
}

}  // namespace crtb
