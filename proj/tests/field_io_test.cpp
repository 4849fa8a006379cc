#include <cmath>
#include <fstream>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "qvest/errors.hpp"
#include "qvest/field_io.hpp"

using namespace qvest;

namespace {

GridField sample_field() {
  GridSpec g;
  g.d = 2;
  g.n = 7;
  g.counts = {3, 4};
  g.origin = {0.25, -1.5};
  GridField f{g, {}};
  for (std::size_t i = 0; i < g.size(); ++i) f.values.push_back(std::sin(1.0 + i) * 1e3 / 3.0 + 1e-300 * i);
  return f;
}

}  // namespace

TEST(FieldIo, BinaryRoundTripIsExact) {
  const GridField f = sample_field();
  std::stringstream ss;
  write_field_binary(ss, f);
  const GridField g = read_field_binary(ss);
  EXPECT_EQ(g.spec, f.spec);
  EXPECT_EQ(g.values, f.values);
}

TEST(FieldIo, CsvRoundTripIsExact) {
  const GridField f = sample_field();
  std::stringstream ss;
  write_field_csv(ss, f);
  const GridField g = read_field_csv(ss);
  EXPECT_EQ(g.spec, f.spec);
  EXPECT_EQ(g.values, f.values);
}

TEST(FieldIo, CsvLayout) {
  const GridField f = sample_field();
  std::stringstream ss;
  write_field_csv(ss, f);
  std::string first, header;
  std::getline(ss, first);
  std::getline(ss, header);
  EXPECT_EQ(first.rfind("# ", 0), 0u);
  EXPECT_EQ(header, "i0,i1,value");
}

TEST(FieldIo, CsvLimit) {
  GridField big{GridSpec::cube(2, 200, 101), {}};
  big.values.assign(big.spec.size(), 0.0);
  std::stringstream ss;
  EXPECT_THROW(write_field_csv(ss, big), DomainError);
}

TEST(FieldIo, RejectsBadHeaders) {
  std::stringstream bad("GRIDFIELD 2\n1 1 1 0\n");
  EXPECT_THROW(read_field_binary(bad), DomainError);
  std::stringstream truncated;
  write_field_binary(truncated, sample_field());
  std::string s = truncated.str();
  s.resize(s.size() - 8);
  std::stringstream cut(s);
  EXPECT_THROW(read_field_binary(cut), DomainError);
  std::stringstream csv("i0,value\n0,1\n");
  EXPECT_THROW(read_field_csv(csv), DomainError);
  std::stringstream short_rows("# 1 4 2 0\ni0,value\n0,1\n");
  EXPECT_THROW(read_field_csv(short_rows), DomainError);
}

TEST(FieldIo, PathDispatch) {
  const auto dir = std::filesystem::temp_directory_path() / "qvest_field_io_test";
  std::filesystem::create_directories(dir);
  const GridField f = sample_field();
  for (const char* name : {"f.bin", "f.csv"}) {
    write_field(dir / name, f);
    EXPECT_EQ(read_field(dir / name).values, f.values);
  }
  std::ifstream csv(dir / "f.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line[0], '#');
  EXPECT_THROW(read_field(dir / "missing.bin"), Error);
  std::filesystem::remove_all(dir);
}
