#include <sstream>

#include "doctest.h"
#include "gpsm/common.hpp"
#include "gpsm/dataset.hpp"
#include "support.hpp"

using namespace gpsm;

namespace {

Dataset from_text(const std::string& text, const CsvSchema& schema = {}) {
  std::istringstream in(text);
  return read_csv(in, schema);
}

}  // namespace

TEST_CASE("six-row file with three arms reads back") {
  const Dataset ds = from_text(
      "y,w,a,b\n"
      "1.5,1,0.1,2\n"
      "2.5,2,0.2,3\n"
      "3.5,3,0.3,5\n"
      "4.5,1,0.4,7\n"
      "5.5,2,0.5,11\n"
      "6.5,3,0.6,13\n");
  CHECK(ds.n() == 6);
  CHECK(ds.t == 3);
  CHECK(ds.d() == 2);
  CHECK(ds.names == std::vector<std::string>{"a", "b"});
  CHECK(ds.y[3] == 4.5);
  CHECK(ds.w[5] == 3);
  CHECK(ds.x(4, 1) == 11.0);
  CHECK(ds.arm_size(1) == 2);
  CHECK(ds.arm_units(2) == std::vector<int>{1, 4});
}

TEST_CASE("an absent treatment level is reported") {
  CsvSchema schema;
  schema.levels = 3;
  try {
    from_text("y,w,a\n1,1,0\n2,2,1\n3,1,2\n4,2,5\n", schema);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("with no units: 3") != std::string::npos);
  }
}

TEST_CASE("string column is dummy coded against its smallest level") {
  CsvSchema schema;
  schema.categorical = {"g"};
  const Dataset ds = from_text("y,w,g,a\n1,1,A,0.5\n2,2,B,1.5\n3,2,B,0.1\n", schema);
  REQUIRE(ds.d() == 2);
  CHECK(ds.names[0] == "g=B");
  CHECK(ds.x.col(0) == Eigen::Vector3d(0, 1, 1));
}

TEST_CASE("missing values are rejected with line and column") {
  try {
    from_text("y,w,a\n1,1,0.5\n2,2,NA\n3,1,4\n");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("'a'") != std::string::npos);
  }
  CHECK_THROWS_AS(from_text("y,w,a\n1,1,\n2,2,3\n"), ValidationError);
}

TEST_CASE("non-numeric unflagged columns are rejected") {
  CHECK_THROWS_WITH_AS(from_text("y,w,a\n1,1,x\n2,2,y\n"), doctest::Contains("categorical"), ValidationError);
}

TEST_CASE("excluded columns are ignored, even when missing") {
  CsvSchema schema;
  schema.exclude = {"id"};
  const Dataset ds = from_text("id,y,w,a\nu1,1,1,0.5\n,2,2,1.5\n", schema);
  CHECK(ds.d() == 1);
  CHECK(ds.names[0] == "a");
}

TEST_CASE("string treatment labels map to sorted levels") {
  const Dataset ds = from_text("y,w,a\n1,low,1\n2,high,2\n3,mid,4\n4,low,3\n");
  CHECK(ds.t == 3);
  CHECK(ds.level_labels == std::vector<std::string>{"high", "low", "mid"});
  CHECK(ds.w == std::vector<int>{2, 1, 3, 2});
}

TEST_CASE("quoted fields, BOM and CRLF are handled") {
  const Dataset ds = from_text("\xEF\xBB\xBFy,\"w\",\"a,b\"\r\n1,1,\"2.5\"\r\n2,2,3\r\n");
  CHECK(ds.names[0] == "a,b");
  CHECK(ds.x(0, 0) == 2.5);
}

TEST_CASE("zero-variance and non-finite inputs are rejected") {
  CHECK_THROWS_WITH_AS(from_text("y,w,a\n1,1,5\n2,2,5\n3,1,5\n"), doctest::Contains("'a' has zero variance"),
                       ValidationError);
  CHECK_THROWS_AS(make_dataset(Eigen::Vector2d(1, INFINITY), {1, 2}, Eigen::Matrix<double, 2, 1>(0, 1), {"a"}, 2),
                  ValidationError);
  CHECK_THROWS_AS(make_dataset(Eigen::Vector2d(1, 2), {1, 3}, Eigen::Matrix<double, 2, 1>(0, 1), {"a"}, 2),
                  ValidationError);
}

TEST_CASE("standardize: column {1,2,3} becomes mean 0, sd 1") {
  const Dataset ds = make_dataset(Eigen::Vector3d(1, 2, 3), {1, 2, 1}, Eigen::Matrix<double, 3, 1>(1, 2, 3), {"a"}, 2);
  const Dataset s = standardize(ds);
  CHECK(s.standardized);
  CHECK(s.center[0] == 2.0);
  CHECK(s.scale[0] == 1.0);
  CHECK(s.x.col(0) == Eigen::Vector3d(-1, 0, 1));
  CHECK_THROWS_AS(standardize(s), ValidationError);
}

TEST_CASE("standardize: zero variance column is named") {
  Dataset ds = make_dataset(Eigen::Vector3d(1, 2, 3), {1, 2, 1}, Eigen::Matrix<double, 3, 1>(1, 2, 3), {"flat"}, 2);
  ds.x.col(0).setConstant(5.0);
  CHECK_THROWS_WITH_AS(standardize(ds), doctest::Contains("'flat'"), ValidationError);
}

TEST_CASE("property: standardized columns have mean 0 and sd 1; re-standardizing is a no-op") {
  testing::Rng g(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = testing::uniform_int(g, 5, 80);
    Dataset ds = testing::random_dataset(g, n, 3, 4);
    ds.x = (ds.x.array() * 7.0 + 3.0).matrix();
    const Dataset s = standardize(ds);
    for (int j = 0; j < s.d(); ++j) {
      const double mean = s.x.col(j).mean();
      const double sd = std::sqrt((s.x.col(j).array() - mean).square().sum() / (n - 1));
      CHECK(std::abs(mean) < 1e-10);
      CHECK(std::abs(sd - 1.0) < 1e-10);
    }
    Dataset again = s;
    again.standardized = false;
    const Dataset s2 = standardize(again);
    CHECK((s2.x - s.x).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("property: write_csv then read_csv round-trips bit-exactly") {
  testing::Rng g(12);
  for (int trial = 0; trial < 50; ++trial) {
    const int t = testing::uniform_int(g, 2, 4);
    Dataset ds = testing::random_dataset(g, testing::uniform_int(g, t + 2, 40), t, testing::uniform_int(g, 1, 5));
    for (int i = 0; i < ds.n(); ++i) ds.y[i] = std::ldexp(testing::normal(g), testing::uniform_int(g, -40, 40));
    std::stringstream buf;
    write_csv(ds, buf);
    CsvSchema schema;
    schema.levels = t;
    const Dataset back = read_csv(buf, schema);
    CHECK(back.y == ds.y);
    CHECK(back.w == ds.w);
    CHECK(back.x == ds.x);
    CHECK(back.names == ds.names);
    CHECK(back.t == ds.t);
  }
}

TEST_CASE("numeric_column reads raw table columns") {
  std::istringstream in("p,q\n1,2\n3,4\n");
  const CsvTable t = read_csv_table(in);
  CHECK(numeric_column(t, "q") == std::vector<double>{2, 4});
  CHECK_THROWS_AS(numeric_column(t, "r"), ValidationError);
}
