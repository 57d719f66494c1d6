#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "flows.hpp"
#include "flowvgae/graph/hetgraph.hpp"

using namespace flowvgae::graph;
using flowvgae::flow::FlowRecord;
using flowvgae::numerics::Shape;
using flowvgae::numerics::Tensor;
using flowvgae::testing::make_flow;
using flowvgae::windowing::TimeWindow;

namespace {

struct Built {
  std::vector<FlowRecord> records;
  HetGraph graph;
};

Tensor index_features(std::size_t n, std::size_t f = 3) {
  Tensor t(Shape{n, f});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < f; ++c) t.at(r, c) = static_cast<double>(r * 10 + c);
  }
  return t;
}

HetGraph graph_of(const std::vector<FlowRecord>& rs) {
  TimeWindow w;
  w.window_id = 4;
  for (std::size_t i = 0; i < rs.size(); ++i) w.members.push_back(i);
  return build_graph(w, rs, index_features(rs.size()));
}

HetGraph random_graph(std::size_t flows, std::size_t hosts, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> h(0, hosts - 1);
  std::vector<FlowRecord> rs;
  for (std::size_t i = 0; i < flows; ++i) {
    rs.push_back(make_flow("h" + std::to_string(h(rng)), "h" + std::to_string(h(rng)), 0.0));
  }
  return graph_of(rs);
}

std::multiset<std::pair<std::string, std::string>> address_edges(const HetGraph& g, Relation r) {
  std::multiset<std::pair<std::string, std::string>> out;
  for (auto e : g.edges[r]) {
    auto [ip, c] = as_ip_conn(r, e);
    std::string row;
    for (std::size_t k = 0; k < g.feature_dim(); ++k) row += std::to_string(g.conn_features.at(c, k)) + ",";
    out.emplace(g.ip_addresses[ip], row);
  }
  return out;
}

}  // namespace

TEST_CASE("two flows from one source") {
  auto g = graph_of({make_flow("A", "B", 0), make_flow("A", "C", 1, 5.0, 1)});
  CHECK(g.ip_count() == 3);
  CHECK(g.conn_count() == 2);
  CHECK(g.window_id == 4);
  CHECK(g.ip_addresses == std::vector<std::string>{"A", "B", "C"});
  CHECK(g.edges[kSrcToConn] == std::vector<EdgePair>{{0, 0}, {0, 1}});
  CHECK(g.edges[kConnToSrc] == std::vector<EdgePair>{{0, 0}, {1, 0}});
  CHECK(g.edges[kDstToConn] == std::vector<EdgePair>{{1, 0}, {2, 1}});
  CHECK(g.edges[kConnToDst] == std::vector<EdgePair>{{0, 1}, {1, 2}});
  CHECK(g.conn_labels == std::vector<std::uint8_t>{0, 1});
  CHECK(g.conn_features.at(1, 2) == 12.0);
}

TEST_CASE("self loop flow") {
  auto g = graph_of({make_flow("A", "A", 0)});
  CHECK(g.ip_count() == 1);
  CHECK(g.conn_count() == 1);
  CHECK(g.edges[kSrcToConn] == std::vector<EdgePair>{{0, 0}});
  CHECK(g.edges[kDstToConn] == std::vector<EdgePair>{{0, 0}});
}

TEST_CASE("100 flows among 5 hosts") {
  auto g = random_graph(100, 5, 11);
  CHECK(g.ip_count() == 5);
  CHECK(g.conn_count() == 100);
  for (const auto& list : g.edges) CHECK(list.size() == 100);
  // each conn node has exactly one src and one dst pair, ids in range
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    std::vector<int> per_conn(100, 0);
    for (auto e : g.edges[r]) {
      auto [ip, c] = as_ip_conn(static_cast<Relation>(r), e);
      CHECK(ip < g.ip_count());
      ++per_conn.at(c);
    }
    CHECK(std::all_of(per_conn.begin(), per_conn.end(), [](int k) { return k == 1; }));
  }
}

TEST_CASE("graph construction is permutation consistent") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> h(0, 7);
  std::vector<FlowRecord> rs;
  for (int i = 0; i < 40; ++i) {
    rs.push_back(make_flow("h" + std::to_string(h(rng)), "h" + std::to_string(h(rng)), i));
  }
  TimeWindow w;
  for (std::size_t i = 0; i < rs.size(); ++i) w.members.push_back(i);
  const auto feats = index_features(rs.size());
  auto g1 = build_graph(w, rs, feats);
  CHECK(build_graph(w, rs, feats) == g1);
  std::shuffle(w.members.begin(), w.members.end(), rng);
  auto g2 = build_graph(w, rs, feats);
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    CHECK(address_edges(g1, static_cast<Relation>(r)) == address_edges(g2, static_cast<Relation>(r)));
  }
}

TEST_CASE("node masking") {
  std::mt19937_64 rng(1);
  const auto feats = index_features(10);
  const Tensor token(Shape{1, 3}, -7.0);
  SUBCASE("rate 0") {
    auto [out, plan] = mask_nodes(feats, 0.0, token, rng);
    CHECK(out == feats);
    CHECK(plan.rows.empty());
  }
  SUBCASE("rate 1") {
    auto [out, plan] = mask_nodes(feats, 1.0, token, rng);
    CHECK(plan.rows.size() == 10);
    CHECK(out == Tensor(Shape{10, 3}, -7.0));
  }
  SUBCASE("rate 0.5") {
    auto [out, plan] = mask_nodes(feats, 0.5, token, rng);
    CHECK(plan.rows.size() == 5);
    CHECK(std::set<std::uint32_t>(plan.rows.begin(), plan.rows.end()).size() == 5);
    for (std::size_t r = 0; r < 10; ++r) {
      const bool masked = std::binary_search(plan.rows.begin(), plan.rows.end(), r);
      CHECK((out.at(r, 0) == -7.0) == masked);
    }
  }
  CHECK_THROWS(mask_nodes(feats, 0.5, Tensor(Shape{1, 2}), rng));
}

TEST_CASE("edge dropping") {
  auto g = random_graph(1000, 40, 2);
  std::mt19937_64 rng(8);
  SUBCASE("rate 0 keeps all") {
    CHECK(drop_edges(g, 0.0, rng).surviving == g.edges);
  }
  SUBCASE("rate 0.5 stays inside the binomial interval and drops pairs together") {
    auto plan = drop_edges(g, 0.5, rng);
    const auto kept = plan.surviving[kSrcToConn].size();
    CHECK(kept >= 440);
    CHECK(kept <= 560);
    for (Relation fwd : {kSrcToConn, kDstToConn}) {
      const auto& f = plan.surviving[fwd];
      const auto& b = plan.surviving[fwd + 1];
      REQUIRE(f.size() == b.size());
      for (std::size_t i = 0; i < f.size(); ++i) CHECK(b[i] == EdgePair{f[i].second, f[i].first});
    }
  }
  CHECK_THROWS_AS(drop_edges(g, 1.0, rng), std::invalid_argument);
}

TEST_CASE("negative edge sampling") {
  std::mt19937_64 rng(3);
  SUBCASE("count is round(rate * positives)") {
    std::vector<FlowRecord> rs;
    for (int i = 0; i < 10; ++i) rs.push_back(make_flow("s" + std::to_string(i % 3), "d" + std::to_string(i % 4), i));
    auto g = graph_of(rs);
    auto neg = sample_negative_edges(g, 0.2, rng);
    for (std::size_t r = 0; r < kRelationCount; ++r) {
      CHECK(neg.pairs[r].size() == 2);
      std::set<EdgePair> truth;
      for (auto e : g.edges[r]) truth.insert(as_ip_conn(static_cast<Relation>(r), e));
      std::set<EdgePair> uniq(neg.pairs[r].begin(), neg.pairs[r].end());
      CHECK(uniq.size() == neg.pairs[r].size());
      for (auto p : neg.pairs[r]) CHECK_FALSE(truth.contains(p));
    }
    CHECK(neg.warnings.empty());
  }
  SUBCASE("complete bipartite relation gives a warning") {
    auto g = graph_of({make_flow("A", "A", 0)});
    auto neg = sample_negative_edges(g, 1.0, rng);
    for (const auto& list : neg.pairs) CHECK(list.empty());
    CHECK(neg.warnings.size() == kRelationCount);
  }
  SUBCASE("larger graph never returns a true edge") {
    auto g = random_graph(300, 30, 4);
    auto neg = sample_negative_edges(g, 0.4, rng);
    for (std::size_t r = 0; r < kRelationCount; ++r) {
      CHECK(neg.pairs[r].size() == 120);
      std::set<EdgePair> truth;
      for (auto e : g.edges[r]) truth.insert(as_ip_conn(static_cast<Relation>(r), e));
      for (auto p : neg.pairs[r]) CHECK_FALSE(truth.contains(p));
    }
  }
}

TEST_CASE("graph container round trip") {
  std::vector<HetGraph> gs = {random_graph(20, 4, 1), graph_of({make_flow("A", "B", 0)})};
  const auto path = std::filesystem::temp_directory_path() / "flowvgae_graph_test.bin";
  write_graphs(path, gs);
  CHECK(read_graphs(path) == gs);
  std::filesystem::remove(path);
  const auto text = summarize(gs);
  CHECK(text.find("4\t2\t1\t4\t0") != std::string::npos);
}
