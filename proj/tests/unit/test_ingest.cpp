#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "flows.hpp"
#include "flowvgae/flow/ingest.hpp"

using namespace flowvgae::flow;
using flowvgae::testing::make_flow;

namespace {

std::string to_csv(const std::vector<FlowRecord>& records) {
  std::ostringstream out;
  write_flows(out, records);
  return out.str();
}

std::vector<FlowRecord> with_protocols(std::initializer_list<std::pair<int, int>> counts) {
  std::vector<FlowRecord> out;
  for (auto [proto, n] : counts) {
    for (int i = 0; i < n; ++i) {
      auto r = make_flow("10.0.0.1", "10.0.0.2", i);
      r[kProtocol] = proto;
      out.push_back(r);
    }
  }
  return out;
}

double block_norm(const std::vector<double>& v, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("parse reads every row in order") {
  std::vector<FlowRecord> rs = {make_flow("a", "b", 1), make_flow("a", "c", 2),
                                make_flow("c", "b", 3, 17.5, 1)};
  std::istringstream in(to_csv(rs));
  const auto parsed = parse_flows(in);
  REQUIRE(parsed.size() == 3);
  CHECK(parsed == rs);
}

TEST_CASE("columns may appear in any order") {
  std::vector<FlowRecord> rs = {make_flow("a", "b", 1)};
  std::string csv = to_csv(rs);
  // swap first two header cells and the matching data cells
  auto swap_first = [](std::string line) {
    auto c1 = line.find(',');
    auto c2 = line.find(',', c1 + 1);
    return line.substr(c1 + 1, c2 - c1 - 1) + "," + line.substr(0, c1) + line.substr(c2);
  };
  std::istringstream lines(csv);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  std::istringstream in(swap_first(header) + "\n" + swap_first(row) + "\n");
  CHECK(parse_flows(in) == rs);
}

TEST_CASE("missing column is a schema error naming it") {
  std::string csv = to_csv({make_flow("a", "b", 1)});
  const auto pos = csv.find("protocol,");
  REQUIRE(pos != std::string::npos);
  csv.erase(pos, 9);
  std::istringstream in(csv);
  try {
    parse_flows(in);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    REQUIRE(e.missing().size() == 1);
    CHECK(e.missing()[0] == "protocol");
    CHECK(std::string(e.what()).find("protocol") != std::string::npos);
  }
}

TEST_CASE("non-numeric cell reports its line") {
  auto r = make_flow("a", "b", 1);
  std::string csv = to_csv({r, r});
  const auto second_row = csv.find('\n', csv.find('\n') + 1) + 1;
  const auto bytes = std::to_string(static_cast<int>(r[kBiBytes]));
  const auto at = csv.find("," + bytes + ",", second_row);
  REQUIRE(at != std::string::npos);
  csv.replace(at + 1, bytes.size(), "lots");
  std::istringstream in(csv);
  try {
    parse_flows(in);
    FAIL("expected RowError");
  } catch (const RowError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("clean drops missing and infinite values") {
  std::vector<FlowRecord> rs;
  for (int i = 0; i < 5; ++i) rs.push_back(make_flow("a", "b", i));
  rs[1][kBiBytes] = std::numeric_limits<double>::quiet_NaN();
  rs[3][kBiBytes] = std::numeric_limits<double>::quiet_NaN();
  auto res = clean(rs);
  CHECK(res.records.size() == 3);
  CHECK(res.dropped == 2);
  CHECK(res.records[0][kBiFirstSeenMs] == 0);
  CHECK(res.records[1][kBiFirstSeenMs] == 2);
  CHECK(res.records[2][kBiFirstSeenMs] == 4);

  auto inf = make_flow("a", "b", 0);
  inf[kBiMeanIatMs] = std::numeric_limits<double>::infinity();
  CHECK(clean({inf}).records.empty());

  auto again = clean(res.records);
  CHECK(again.dropped == 0);
  CHECK(again.records == res.records);
}

TEST_CASE("missing cells round-trip through text as empty") {
  auto r = make_flow("a", "b", 1);
  r[kBiBytes] = std::numeric_limits<double>::quiet_NaN();
  std::istringstream in(to_csv({r}));
  auto parsed = parse_flows(in);
  REQUIRE(parsed.size() == 1);
  CHECK(std::isnan(parsed[0][kBiBytes]));
  CHECK(clean(parsed).dropped == 1);
}

TEST_CASE("encoder keeps the two most frequent protocols") {
  SUBCASE("frequency order") {
    auto spec = fit_encoder(with_protocols({{1, 1}, {17, 5}, {6, 10}}));
    CHECK(spec.protocol_keep == std::vector<int>{6, 17});
  }
  SUBCASE("three-way tie keeps the smallest values") {
    auto spec = fit_encoder(with_protocols({{17, 5}, {58, 5}, {6, 5}}));
    CHECK(spec.protocol_keep == std::vector<int>{6, 17});
  }
  SUBCASE("single protocol") {
    auto spec = fit_encoder(with_protocols({{6, 3}}));
    CHECK(spec.protocol_keep == std::vector<int>{6});
    CHECK(spec.width() == spec.continuous.size() + 3 + 2);
  }
  CHECK_THROWS_AS(fit_encoder({}), std::invalid_argument);
}

TEST_CASE("encode layout") {
  auto spec = fit_encoder(with_protocols({{1, 1}, {17, 5}, {6, 10}}));
  const std::size_t n = spec.continuous.size();
  CHECK(n == 24);

  auto r = make_flow("a", "b", 0);
  for (auto c : spec.continuous) r[c] = 0.0;
  r[spec.continuous[0]] = 3.0;
  r[spec.continuous[1]] = 4.0;
  r[kProtocol] = 1;
  auto v = encode(r, spec);
  REQUIRE(v.size() == spec.width());
  CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-15));
  for (std::size_t i = 2; i < n; ++i) CHECK(v[i] == 0.0);
  CHECK(v[n] == 0.0);
  CHECK(v[n + 1] == 0.0);
  CHECK(v[n + 2] == 1.0);  // Rare
  CHECK(v[n + 3] == 1.0);  // ip_version 4
  CHECK(v[n + 4] == 0.0);  // other

  SUBCASE("zero block stays zero") {
    for (auto c : spec.continuous) r[c] = 0.0;
    auto z = encode(r, spec);
    for (std::size_t i = 0; i < n; ++i) CHECK(z[i] == 0.0);
  }
  SUBCASE("unseen ip version goes to the other slot") {
    r[kIpVersion] = 6;
    auto z = encode(r, spec);
    CHECK(z[n + 3] == 0.0);
    CHECK(z[n + 4] == 1.0);
  }
}

TEST_CASE("encoded vectors: unit norm block and one hot per group") {
  std::mt19937_64 rng(7);
  std::lognormal_distribution<double> ln(3.0, 2.0);
  std::vector<FlowRecord> rs;
  for (int i = 0; i < 200; ++i) {
    auto r = make_flow("a", "b", i);
    for (auto c : default_continuous_columns()) r[c] = i % 17 == 0 ? 0.0 : ln(rng);
    r[kProtocol] = std::array{6, 17, 1, 58}[i % 4];
    rs.push_back(r);
  }
  auto spec = fit_encoder(rs);
  const std::size_t n = spec.continuous.size();
  for (const auto& r : rs) {
    auto v = encode(r, spec);
    const double norm = block_norm(v, n);
    CHECK((norm == 0.0 || std::abs(norm - 1.0) <= 1e-9));
    CHECK(v[n] + v[n + 1] + v[n + 2] == 1.0);
    CHECK(std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(n + 3), v.end(), 0.0) == 1.0);
    CHECK(encode(r, spec) == v);
  }
}

TEST_CASE("encoder spec and feature matrix serialisation") {
  auto spec = fit_encoder(with_protocols({{17, 5}, {6, 10}}));
  CHECK(EncoderSpec::from_json(spec.to_json()) == spec);

  std::vector<FlowRecord> rs = {make_flow("a", "b", 0, 123.0), make_flow("b", "c", 1, 456.0)};
  auto m = encode_all(rs, spec);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == spec.width());
  const auto path = std::filesystem::temp_directory_path() / "flowvgae_matrix_test.bin";
  write_feature_matrix(path, m);
  CHECK(read_feature_matrix(path) == m);
  std::filesystem::remove(path);
}
