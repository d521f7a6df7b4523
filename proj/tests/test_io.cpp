#include "crtb/io.hpp"

#include "crtb/rng.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

using namespace crtb;

namespace {

std::string temp_csv(const char* tag) {
  return (std::filesystem::temp_directory_path() /
          (std::string("crtb_io_") + tag + ".csv"))
      .string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

}  // namespace

TEST_CASE("format_double round-trips doubles through shortest form") {
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(1.5) == "1.5");
  CHECK(format_double(0.1) == "0.1");
  Rng rng(111);
  for (int i = 0; i < 200; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.below(20) % 20 - 10.0);
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("write_table then read_table is bit-identical") {
  Rng rng(112);
  Matrix m = rng.normal_matrix(17, 4);
  m(0, 0) = 1e-300;
  m(1, 1) = -12345.678901234567;
  m(2, 2) = 3.0;
  const std::string path = temp_csv("roundtrip");
  write_table(path, {"a", "b", "c", "d"}, m);
  const Table t = read_table(path);
  std::remove(path.c_str());
  REQUIRE(t.names.size() == 4);
  CHECK(t.names[0] == "a");
  CHECK(t.names[3] == "d");
  REQUIRE(t.values.rows() == 17);
  REQUIRE(t.values.cols() == 4);
  CHECK((t.values.array() == m.array()).all());
}

TEST_CASE("read_table parses plain csv with windows line endings") {
  const std::string path = temp_csv("crlf");
  write_text(path, "x,y\r\n1,2\r\n3.5,-4\r\n");
  const Table t = read_table(path);
  std::remove(path.c_str());
  REQUIRE(t.values.rows() == 2);
  CHECK(t.values(0, 0) == 1.0);
  CHECK(t.values(1, 0) == 3.5);
  CHECK(t.values(1, 1) == -4.0);
}

TEST_CASE("read_table skips blank lines and supports other delimiters") {
  const std::string path = temp_csv("blank");
  write_text(path, "x\ty\n1\t2\n\n3\t4\n");
  const Table t = read_table(path, '\t');
  std::remove(path.c_str());
  REQUIRE(t.values.rows() == 2);
  CHECK(t.values(1, 1) == 4.0);
}

TEST_CASE("read_table reports malformed input with line numbers") {
  const std::string path = temp_csv("bad");

  write_text(path, "x,y\n1,2\n3\n");
  CHECK_THROWS_WITH_AS(read_table(path),
                       doctest::Contains("line 3"), InvalidInputError);

  write_text(path, "x,y\n1,abc\n");
  CHECK_THROWS_WITH_AS(read_table(path), doctest::Contains("'abc'"),
                       InvalidInputError);

  write_text(path, "x,y\n1,inf\n");
  CHECK_THROWS_AS(read_table(path), InvalidInputError);

  write_text(path, "x,x\n1,2\n");
  CHECK_THROWS_WITH_AS(read_table(path), doctest::Contains("duplicate"),
                       InvalidInputError);

  write_text(path, "x,y\n1,\n");
  CHECK_THROWS_AS(read_table(path), InvalidInputError);

  write_text(path, "");
  CHECK_THROWS_AS(read_table(path), InvalidInputError);
  std::remove(path.c_str());

  CHECK_THROWS_AS(read_table(temp_csv("does_not_exist")), InvalidInputError);
}

TEST_CASE("read_table accepts a header-only file as zero rows") {
  const std::string path = temp_csv("empty_body");
  write_text(path, "a,b\n");
  const Table t = read_table(path);
  std::remove(path.c_str());
  CHECK(t.values.rows() == 0);
  CHECK(t.values.cols() == 2);
}

TEST_CASE("write_int_table writes plain integers") {
  IntMatrix m(2, 3);
  m << 1, 0, 1, 0, 1, 0;
  const std::string path = temp_csv("ints");
  write_int_table(path, {"a", "b", "c"}, m);
  const Table t = read_table(path);
  std::remove(path.c_str());
  CHECK(t.values(0, 0) == 1.0);
  CHECK(t.values(1, 2) == 0.0);

  CHECK_THROWS_AS(write_int_table(path, {"a"}, m), InvalidInputError);
}
