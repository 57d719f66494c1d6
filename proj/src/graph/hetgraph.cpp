#include "flowvgae/graph/hetgraph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "flowvgae/io/binary.hpp"

namespace flowvgae::graph {

const char* relation_name(Relation r) {
  switch (r) {
    case kSrcToConn: return "src_ip->conn";
    case kConnToSrc: return "conn->src_ip";
    case kDstToConn: return "dst_ip->conn";
    case kConnToDst: return "conn->dst_ip";
  }
  return "?";
}

std::unordered_map<std::string, std::uint32_t> HetGraph::ip_index() const {
  std::unordered_map<std::string, std::uint32_t> idx;
  for (std::uint32_t i = 0; i < ip_addresses.size(); ++i) idx.emplace(ip_addresses[i], i);
  return idx;
}

HetGraph build_graph(const windowing::TimeWindow& window,
                     const std::vector<flow::FlowRecord>& records,
                     const numerics::Tensor& features) {
  if (window.members.empty()) throw std::invalid_argument("build_graph: empty window");
  if (features.rows() != records.size()) {
    throw numerics::DimensionError("build_graph: feature rows do not match record count");
  }
  HetGraph g;
  g.window_id = window.window_id;
  const std::size_t n = window.members.size();
  const std::size_t f = features.cols();
  g.conn_features = numerics::Tensor(numerics::Shape{n, f});
  g.conn_labels.resize(n);
  std::unordered_map<std::string, std::uint32_t> index;
  auto ip_id = [&](const std::string& addr) {
    auto [it, inserted] = index.emplace(addr, static_cast<std::uint32_t>(g.ip_addresses.size()));
    if (inserted) g.ip_addresses.push_back(addr);
    return it->second;
  };
  for (std::uint32_t c = 0; c < n; ++c) {
    const std::size_t r = window.members[c];
    const auto& rec = records.at(r);
    std::copy_n(features.values().begin() + static_cast<std::ptrdiff_t>(r * f), f,
                g.conn_features.values().begin() + static_cast<std::ptrdiff_t>(c * f));
    g.conn_labels[c] = rec.is_anomalous() ? 1 : 0;
    const auto s = ip_id(rec.src_ip);
    const auto d = ip_id(rec.dst_ip);
    g.edges[kSrcToConn].emplace_back(s, c);
    g.edges[kConnToSrc].emplace_back(c, s);
    g.edges[kDstToConn].emplace_back(d, c);
    g.edges[kConnToDst].emplace_back(c, d);
  }
  return g;
}

MaskPlan sample_mask_plan(std::size_t n_conn, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate > 1.0) throw std::invalid_argument("mask rate must lie in [0, 1]");
  MaskPlan plan;
  plan.rate = rate;
  const auto k = static_cast<std::size_t>(std::floor(rate * static_cast<double>(n_conn) + 1e-9));
  if (k == 0) return plan;
  std::vector<std::uint32_t> ids(n_conn);
  std::iota(ids.begin(), ids.end(), 0u);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n_conn - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  plan.rows.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(plan.rows.begin(), plan.rows.end());
  return plan;
}

std::pair<numerics::Tensor, MaskPlan> mask_nodes(const numerics::Tensor& conn_features,
                                                 double rate,
                                                 const numerics::Tensor& mask_token,
                                                 std::mt19937_64& rng) {
  const std::size_t f = conn_features.cols();
  if (mask_token.numel() != f) {
    throw numerics::DimensionError("mask token width does not match feature width");
  }
  auto plan = sample_mask_plan(conn_features.rows(), rate, rng);
  numerics::Tensor out = conn_features;
  for (auto r : plan.rows) {
    std::copy(mask_token.values().begin(), mask_token.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(r * f));
  }
  return {std::move(out), std::move(plan)};
}

EdgeDropPlan drop_edges(const HetGraph& g, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("edge drop rate must lie in [0, 1)");
  EdgeDropPlan plan;
  plan.rate = rate;
  std::bernoulli_distribution drop(rate);
  // forward relation i pairs with reverse relation i + 1
  for (Relation fwd : {kSrcToConn, kDstToConn}) {
    const auto rev = static_cast<Relation>(fwd + 1);
    const auto& f_edges = g.edges[fwd];
    const auto& r_edges = g.edges[rev];
    for (std::size_t e = 0; e < f_edges.size(); ++e) {
      if (rate > 0.0 && drop(rng)) continue;
      plan.surviving[fwd].push_back(f_edges[e]);
      plan.surviving[rev].push_back(r_edges[e]);
    }
  }
  return plan;
}

EdgeDropPlan keep_all_edges(const HetGraph& g) {
  EdgeDropPlan plan;
  plan.surviving = g.edges;
  return plan;
}

NegativeEdgeSet sample_negative_edges(const HetGraph& g, double rate, std::mt19937_64& rng) {
  if (rate < 0.0) throw std::invalid_argument("negative sampling rate must be >= 0");
  NegativeEdgeSet out;
  out.rate = rate;
  const std::size_t n_ip = g.ip_count();
  const std::size_t n_conn = g.conn_count();
  auto key = [n_conn](EdgePair p) { return std::uint64_t{p.first} * n_conn + p.second; };
  for (std::size_t ri = 0; ri < kRelationCount; ++ri) {
    const auto r = static_cast<Relation>(ri);
    const auto& pos = g.edges[r];
    std::unordered_set<std::uint64_t> taken;
    for (auto e : pos) taken.insert(key(as_ip_conn(r, e)));
    const auto wanted = static_cast<std::size_t>(std::llround(rate * static_cast<double>(pos.size())));
    const std::size_t available = n_ip * n_conn - taken.size();
    auto& neg = out.pairs[r];
    if (wanted == 0) continue;
    if (available <= wanted) {
      for (std::uint32_t ip = 0; ip < n_ip; ++ip) {
        for (std::uint32_t c = 0; c < n_conn; ++c) {
          if (!taken.contains(key({ip, c}))) neg.emplace_back(ip, c);
        }
      }
      if (available < wanted) {
        out.warnings.push_back(std::string(relation_name(r)) + ": only " +
                               std::to_string(available) + " non-edges exist, wanted " +
                               std::to_string(wanted));
      }
      continue;
    }
    std::uniform_int_distribution<std::uint32_t> pick_ip(0, static_cast<std::uint32_t>(n_ip - 1));
    std::uniform_int_distribution<std::uint32_t> pick_conn(0, static_cast<std::uint32_t>(n_conn - 1));
    while (neg.size() < wanted) {
      const EdgePair cand{pick_ip(rng), pick_conn(rng)};
      if (taken.insert(key(cand)).second) neg.push_back(cand);
    }
  }
  return out;
}

namespace {
constexpr std::string_view kGraphMagic = "FVGGRAPH";
constexpr std::uint32_t kGraphVersion = 1;
}  // namespace

void write_graphs(const std::filesystem::path& path, const std::vector<HetGraph>& graphs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  io::BinaryWriter w(out);
  w.put_magic(kGraphMagic);
  w.put(kGraphVersion);
  w.put<std::uint64_t>(graphs.size());
  for (const auto& g : graphs) {
    w.put<std::uint64_t>(g.window_id);
    w.put<std::uint64_t>(g.conn_features.rows());
    w.put<std::uint64_t>(g.conn_features.cols());
    w.put_array<double>(g.conn_features.values());
    w.put_array<std::uint8_t>(g.conn_labels);
    w.put<std::uint64_t>(g.ip_addresses.size());
    for (const auto& a : g.ip_addresses) w.put_string(a);
    for (const auto& list : g.edges) {
      std::vector<std::uint32_t> flat;
      flat.reserve(list.size() * 2);
      for (auto [a, b] : list) {
        flat.push_back(a);
        flat.push_back(b);
      }
      w.put_array<std::uint32_t>(flat);
    }
  }
}

std::vector<HetGraph> read_graphs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  io::BinaryReader r(in);
  r.expect_magic(kGraphMagic);
  if (r.get<std::uint32_t>() != kGraphVersion) throw io::FormatError("unsupported graph version");
  const auto count = r.get<std::uint64_t>();
  std::vector<HetGraph> graphs;
  graphs.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    HetGraph g;
    g.window_id = r.get<std::uint64_t>();
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    g.conn_features = numerics::Tensor(numerics::Shape{rows, cols}, r.get_array<double>());
    g.conn_labels = r.get_array<std::uint8_t>();
    const auto n_ip = r.get<std::uint64_t>();
    for (std::uint64_t k = 0; k < n_ip; ++k) g.ip_addresses.push_back(r.get_string());
    for (auto& list : g.edges) {
      const auto flat = r.get_array<std::uint32_t>();
      if (flat.size() % 2 != 0) throw io::FormatError("odd edge array length");
      for (std::size_t k = 0; k < flat.size(); k += 2) list.emplace_back(flat[k], flat[k + 1]);
    }
    if (g.conn_labels.size() != rows) throw io::FormatError("label count does not match rows");
    graphs.push_back(std::move(g));
  }
  return graphs;
}

std::string summarize(const std::vector<HetGraph>& graphs) {
  std::ostringstream out;
  out << "window_id\tip_nodes\tconn_nodes\tedges\tanomalous_conns\n";
  for (const auto& g : graphs) {
    std::size_t edges = 0;
    for (const auto& l : g.edges) edges += l.size();
    const auto anomalous = std::count(g.conn_labels.begin(), g.conn_labels.end(), 1);
    out << g.window_id << '\t' << g.ip_count() << '\t' << g.conn_count() << '\t' << edges << '\t'
        << anomalous << '\n';
  }
  return out.str();
}

}  // namespace flowvgae::graph
