#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flowvgae/flow/flow_record.hpp"
#include "flowvgae/numerics/tensor.hpp"
#include "flowvgae/windowing/windowing.hpp"

namespace flowvgae::graph {

/// Typed edges between IP nodes and connection nodes. Forward relations
/// store (ip_id, conn_id); reverse relations store (conn_id, ip_id).
enum Relation : std::size_t { kSrcToConn, kConnToSrc, kDstToConn, kConnToDst };
inline constexpr std::size_t kRelationCount = 4;

constexpr bool ip_is_source(Relation r) { return r == kSrcToConn || r == kDstToConn; }
const char* relation_name(Relation r);

using EdgePair = std::pair<std::uint32_t, std::uint32_t>;
using EdgeLists = std::array<std::vector<EdgePair>, kRelationCount>;

/// Normalises an edge of relation r to (ip_id, conn_id).
constexpr EdgePair as_ip_conn(Relation r, EdgePair e) {
  return ip_is_source(r) ? e : EdgePair{e.second, e.first};
}

/// One time window as a two-node-type graph. IP nodes carry no features of
/// their own; connection node i is flow i of the window.
struct HetGraph {
  std::uint64_t window_id = 0;
  numerics::Tensor conn_features;  // [conn_count x F]
  std::vector<std::uint8_t> conn_labels;
  std::vector<std::string> ip_addresses;  // ip id -> address
  EdgeLists edges;

  std::size_t ip_count() const noexcept { return ip_addresses.size(); }
  std::size_t conn_count() const noexcept { return conn_labels.size(); }
  std::size_t feature_dim() const noexcept { return conn_features.cols(); }
  std::unordered_map<std::string, std::uint32_t> ip_index() const;

  bool operator==(const HetGraph&) const = default;
};

/// features row i must encode records[i]. IP ids follow first appearance
/// (source before destination) in window member order.
HetGraph build_graph(const windowing::TimeWindow& window,
                     const std::vector<flow::FlowRecord>& records,
                     const numerics::Tensor& features);

struct MaskPlan {
  std::vector<std::uint32_t> rows;  // ascending
  double rate = 0.0;
};

/// Chooses floor(rate * n_conn) connection rows uniformly without replacement.
MaskPlan sample_mask_plan(std::size_t n_conn, double rate, std::mt19937_64& rng);

/// Values-only masking: returns a copy of conn_features with the planned
/// rows overwritten by mask_token.
std::pair<numerics::Tensor, MaskPlan> mask_nodes(const numerics::Tensor& conn_features,
                                                 double rate,
                                                 const numerics::Tensor& mask_token,
                                                 std::mt19937_64& rng);

struct EdgeDropPlan {
  EdgeLists surviving;
  double rate = 0.0;
};

/// Drops each forward/reverse edge pair together with probability rate.
/// The result drives message passing only.
EdgeDropPlan drop_edges(const HetGraph& g, double rate, std::mt19937_64& rng);
/// All edges survive.
EdgeDropPlan keep_all_edges(const HetGraph& g);

struct NegativeEdgeSet {
  std::array<std::vector<EdgePair>, kRelationCount> pairs;  // (ip_id, conn_id)
  double rate = 0.0;
  std::vector<std::string> warnings;
};

/// Per relation, rejection-samples round(rate * |positives|) distinct
/// (ip, conn) pairs that are not edges of that relation. When fewer non-edges
/// exist, all of them are returned and a warning is recorded.
NegativeEdgeSet sample_negative_edges(const HetGraph& g, double rate, std::mt19937_64& rng);

/// Versioned binary container holding several graphs.
void write_graphs(const std::filesystem::path& path, const std::vector<HetGraph>& graphs);
std::vector<HetGraph> read_graphs(const std::filesystem::path& path);

/// One line per graph: id, node and edge counts, anomalous connection count.
std::string summarize(const std::vector<HetGraph>& graphs);

}  // namespace flowvgae::graph
