#include "flowvgae/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "flowvgae/util/seed.hpp"

namespace flowvgae::synth {

using flow::Column;
using flow::FlowRecord;

namespace {

constexpr double kWindowMs = 180'000.0;

struct ServerProfile {
  int protocol;
  double log_packets;  // mean of log(packet count)
  double packet_size;  // typical mean packet size in bytes
  double duration_ms;  // mean flow duration
  double upload_share; // fraction of packets sent by the client
};

struct Direction {
  double first, last, duration, packets, bytes, min_ps, max_ps, mean_ps, iat, flags;
};

void put(FlowRecord& r, const Column* cols, const Direction& d) {
  const double v[10] = {d.first, d.last,   d.duration, d.packets, d.bytes,
                        d.min_ps, d.max_ps, d.mean_ps,  d.iat,     d.flags};
  for (int i = 0; i < 10; ++i) r[cols[i]] = v[i];
}

constexpr Column kBi[10] = {flow::kBiFirstSeenMs, flow::kBiLastSeenMs, flow::kBiDurationMs,
                            flow::kBiPackets,     flow::kBiBytes,      flow::kBiMinPs,
                            flow::kBiMaxPs,       flow::kBiMeanPs,     flow::kBiMeanIatMs,
                            flow::kBiCumulativeFlags};
constexpr Column kS2d[10] = {flow::kS2dFirstSeenMs, flow::kS2dLastSeenMs, flow::kS2dDurationMs,
                             flow::kS2dPackets,     flow::kS2dBytes,      flow::kS2dMinPs,
                             flow::kS2dMaxPs,       flow::kS2dMeanPs,     flow::kS2dMeanIatMs,
                             flow::kS2dCumulativeFlags};
constexpr Column kD2s[10] = {flow::kD2sFirstSeenMs, flow::kD2sLastSeenMs, flow::kD2sDurationMs,
                             flow::kD2sPackets,     flow::kD2sBytes,      flow::kD2sMinPs,
                             flow::kD2sMaxPs,       flow::kD2sMeanPs,     flow::kD2sMeanIatMs,
                             flow::kD2sCumulativeFlags};

Direction direction(double start, double duration, double packets, double mean_ps, double flags) {
  Direction d{};
  d.first = start;
  d.last = start + duration;
  d.duration = duration;
  d.packets = packets;
  if (packets > 0) {
    d.mean_ps = mean_ps;
    d.bytes = std::round(packets * mean_ps);
    d.min_ps = packets > 1 ? std::max(40.0, std::floor(mean_ps * 0.5)) : mean_ps;
    d.max_ps = packets > 1 ? std::min(std::max(mean_ps, 1500.0), std::ceil(mean_ps * 1.8)) : mean_ps;
    d.iat = packets > 1 ? duration / (packets - 1) : 0.0;
    d.flags = flags;
  }
  return d;
}

// Bidirectional totals from the two directions.
Direction combine(const Direction& a, const Direction& b) {
  Direction d{};
  d.first = a.first;
  d.last = std::max(a.last, b.packets > 0 ? b.last : a.last);
  d.duration = d.last - d.first;
  d.packets = a.packets + b.packets;
  d.bytes = a.bytes + b.bytes;
  d.mean_ps = d.packets > 0 ? d.bytes / d.packets : 0.0;
  d.min_ps = b.packets > 0 ? std::min(a.min_ps, b.min_ps) : a.min_ps;
  d.max_ps = std::max(a.max_ps, b.max_ps);
  d.iat = d.packets > 1 ? d.duration / (d.packets - 1) : 0.0;
  d.flags = static_cast<double>(static_cast<int>(a.flags) | static_cast<int>(b.flags));
  return d;
}

FlowRecord make_record(const std::string& src, int sport, const std::string& dst, int protocol,
                       const Direction& up, const Direction& down, int label,
                       const char* category) {
  FlowRecord r;
  r.numeric.fill(0.0);
  r.src_ip = src;
  r.dst_ip = dst;
  r.category = category;
  r[flow::kSrcPort] = sport;
  r[flow::kProtocol] = protocol;
  r[flow::kIpVersion] = 4;
  put(r, kS2d, up);
  put(r, kD2s, down);
  put(r, kBi, combine(up, down));
  r[flow::kClassification] = label;
  return r;
}

std::string client_ip(int i) { return "10.0.0." + std::to_string(i + 1); }
std::string server_ip(int i) { return "10.0.1." + std::to_string(i + 1); }

std::vector<ServerProfile> server_profiles(int servers, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ServerProfile> out;
  for (int s = 0; s < servers; ++s) {
    ServerProfile p;
    p.protocol = s % 4 == 3 ? 17 : 6;
    p.log_packets = std::log(8.0 + 40.0 * u(rng));
    p.packet_size = 200.0 + 900.0 * u(rng);
    p.duration_ms = 5'000.0 + 40'000.0 * u(rng);
    p.upload_share = 0.3 + 0.3 * u(rng);
    out.push_back(p);
  }
  return out;
}

FlowRecord benign_flow(double start, int client, int server, const ServerProfile& p,
                       std::mt19937_64& rng) {
  std::lognormal_distribution<double> packets(p.log_packets, 0.3);
  std::lognormal_distribution<double> size(0.0, 0.1);
  std::exponential_distribution<double> duration(1.0 / p.duration_ms);
  std::uniform_int_distribution<int> port(32768, 60999);
  const double total = std::max(2.0, std::round(packets(rng)));
  const double up = std::max(1.0, std::round(total * p.upload_share));
  const double down = std::max(1.0, total - up);
  const double dur = std::round(duration(rng)) + 1.0;
  const double flags = p.protocol == 6 ? 27.0 : 0.0;
  const auto up_dir = direction(start, dur, up, std::round(p.packet_size * 0.4 * size(rng)), flags);
  const auto down_dir =
      direction(start + 1.0, dur - 1.0, down, std::min(1500.0, std::round(p.packet_size * size(rng))), flags);
  return make_record(client_ip(client), port(rng), server_ip(server), p.protocol, up_dir, down_dir, 0,
                     "Benign");
}

void add_volumetric(std::vector<FlowRecord>& out, const AnomalyPlacement& a, double w_start,
                    int servers, const std::vector<ServerProfile>& profiles, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick_server(0, servers - 1);
  std::uniform_real_distribution<double> at(0.0, kWindowMs - 1.0);
  std::uniform_int_distribution<int> port(1024, 65535);
  const int server = pick_server(rng);
  const std::string src = "203.0.113." + std::to_string(1 + a.window % 250);
  for (int i = 0; i < a.flows; ++i) {
    auto r = benign_flow(w_start + std::floor(at(rng)), 0, server, profiles[server], rng);
    r.src_ip = src;
    r[flow::kSrcPort] = port(rng);
    // bytes x50; packet counts unchanged, so mean sizes grow with them
    for (const Column* cols : {kBi, kS2d, kD2s}) {
      r[cols[4]] *= 50.0;
      if (r[cols[3]] > 0) {
        r[cols[7]] = r[cols[4]] / r[cols[3]];
        r[cols[6]] = std::max(r[cols[6]], r[cols[7]]);
        r[cols[5]] = std::min(r[cols[5]], r[cols[7]]);
      }
    }
    r[flow::kClassification] = 1;
    r.category = "DoS";
    out.push_back(r);
  }
}

void add_scan(std::vector<FlowRecord>& out, const AnomalyPlacement& a, double w_start,
              int servers, std::mt19937_64& rng) {
  if (a.targets < 1) throw std::invalid_argument("scan recipe needs at least one target");
  std::uniform_real_distribution<double> at(0.0, kWindowMs - 5'000.0);
  std::uniform_int_distribution<int> port(1024, 65535);
  const std::string src = "198.51.100." + std::to_string(1 + a.window % 250);
  const double t = w_start + std::floor(at(rng));
  const int sport = port(rng);
  for (int i = 0; i < a.targets; ++i) {
    // a few real servers, the rest unused addresses
    const std::string dst = i < std::min(servers, 3) ? server_ip(i) : "10.0.2." + std::to_string(i + 1);
    const auto probe = direction(t + i * 3.0, 0.0, 1.0, 60.0, 2.0);
    const auto reply = i < std::min(servers, 3) ? direction(t + i * 3.0 + 1.0, 0.0, 1.0, 54.0, 20.0)
                                                : direction(t + i * 3.0, 0.0, 0.0, 0.0, 0.0);
    out.push_back(make_record(src, sport, dst, 6, probe, reply, 1, "Reconnaissance"));
  }
}

}  // namespace

std::vector<AnomalyPlacement> spread_anomalies(int windows, int count) {
  if (count < 0 || count > windows) throw std::invalid_argument("spread_anomalies: bad count");
  std::vector<AnomalyPlacement> out;
  for (int i = 0; i < count; ++i) {
    AnomalyPlacement a;
    a.kind = i % 2 == 0 ? AnomalyKind::kVolumetric : AnomalyKind::kScan;
    a.window = static_cast<int>((static_cast<long long>(i) * windows) / count);
    out.push_back(a);
  }
  return out;
}

std::set<int> anomalous_windows(const SynthSpec& spec) {
  std::set<int> out;
  for (const auto& a : spec.anomalies) out.insert(a.window);
  return out;
}

std::vector<FlowRecord> generate(const SynthSpec& spec) {
  if (spec.duration_s <= 0 || spec.host_count < 2 || !(spec.benign_flow_rate > 0.0)) {
    throw std::invalid_argument("synth spec: duration, host count and flow rate must be positive");
  }
  const int servers = std::max(1, spec.host_count / 4);
  const int clients = spec.host_count - servers;
  const int windows = spec.window_count();
  for (const auto& a : spec.anomalies) {
    if (a.window < 0 || a.window >= windows) {
      throw std::invalid_argument("anomaly placed in window " + std::to_string(a.window) +
                                  " outside [0, " + std::to_string(windows) + ")");
    }
  }
  std::mt19937_64 root(spec.seed);
  const auto profiles = server_profiles(servers, root);
  // each client talks mostly to two preferred servers
  std::vector<std::array<int, 2>> preferred(clients);
  std::uniform_int_distribution<int> pick_server(0, servers - 1);
  for (auto& p : preferred) p = {pick_server(root), pick_server(root)};

  std::vector<std::vector<FlowRecord>> per_window(windows);
#pragma omp parallel for schedule(static)
  for (int w = 0; w < windows; ++w) {
    std::mt19937_64 rng(util::derive_seed(spec.seed, static_cast<std::uint64_t>(w)));
    const double w_start = spec.start_ms + w * kWindowMs;
    const double span_ms = std::min(kWindowMs, spec.duration_s * 1000.0 - w * kWindowMs);
    std::poisson_distribution<int> count(spec.benign_flow_rate * span_ms / 1000.0);
    std::uniform_real_distribution<double> at(0.0, span_ms - 1.0);
    std::uniform_int_distribution<int> pick_client(0, clients - 1);
    std::bernoulli_distribution preferred_server(0.8);
    auto& out = per_window[w];
    const int n = std::max(1, count(rng));
    for (int i = 0; i < n; ++i) {
      const int c = pick_client(rng);
      const int s = preferred_server(rng) ? preferred[c][i % 2] : pick_server(rng);
      out.push_back(benign_flow(w_start + std::floor(at(rng)), c, s, profiles[s], rng));
    }
    for (const auto& a : spec.anomalies) {
      if (a.window != w) continue;
      if (a.kind == AnomalyKind::kVolumetric) {
        add_volumetric(out, a, w_start, servers, profiles, rng);
      } else {
        add_scan(out, a, w_start, servers, rng);
      }
    }
  }
  std::vector<FlowRecord> all;
  for (auto& w : per_window) {
    all.insert(all.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  std::stable_sort(all.begin(), all.end(), [](const FlowRecord& a, const FlowRecord& b) {
    return a.first_seen_ms() < b.first_seen_ms();
  });
  return all;
}

}  // namespace flowvgae::synth
