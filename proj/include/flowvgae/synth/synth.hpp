#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "flowvgae/flow/flow_record.hpp"

namespace flowvgae::synth {

enum class AnomalyKind { kVolumetric, kScan };

/// One injected attack inside a window.
struct AnomalyPlacement {
  AnomalyKind kind = AnomalyKind::kVolumetric;
  int window = 0;
  int flows = 12;    // volumetric: burst flows from one external source to one server
  int targets = 25;  // scan: distinct destinations probed by one source
};

struct SynthSpec {
  std::uint64_t seed = 1;
  int duration_s = 180 * 60;   // 60 windows of 180 s
  int host_count = 16;         // a quarter of them act as servers
  double benign_flow_rate = 1.0;  // flows per second
  double start_ms = 1'600'000'000'000.0;
  std::vector<AnomalyPlacement> anomalies;

  int window_count() const { return (duration_s + 179) / 180; }
};

/// `count` placements spread evenly over `windows`, alternating volumetric
/// and scan.
std::vector<AnomalyPlacement> spread_anomalies(int windows, int count);

/// Window indices that carry at least one anomaly.
std::set<int> anomalous_windows(const SynthSpec& spec);

/// Records sorted by first-seen time. Benign flows go from clients to
/// servers; each server has its own traffic profile (log-normal packet
/// counts and sizes, exponential durations). Volumetric bursts multiply
/// bytes by 50; scans are one-packet probes to mostly unused addresses.
/// Deterministic in the spec.
std::vector<flow::FlowRecord> generate(const SynthSpec& spec);

}  // namespace flowvgae::synth
