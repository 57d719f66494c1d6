#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

namespace flowvgae::flow {

/// Column positions of the 37-column bidirectional flow export, in file order.
enum Column : std::size_t {
  kSrcIp,
  kSrcPort,
  kDstIp,
  kProtocol,
  kIpVersion,
  kBiFirstSeenMs,
  kBiLastSeenMs,
  kBiDurationMs,
  kBiPackets,
  kBiBytes,
  kBiMinPs,
  kBiMaxPs,
  kBiMeanPs,
  kBiMeanIatMs,
  kBiCumulativeFlags,
  kS2dFirstSeenMs,
  kS2dLastSeenMs,
  kS2dDurationMs,
  kS2dPackets,
  kS2dBytes,
  kS2dMinPs,
  kS2dMaxPs,
  kS2dMeanPs,
  kS2dMeanIatMs,
  kS2dCumulativeFlags,
  kD2sFirstSeenMs,
  kD2sLastSeenMs,
  kD2sDurationMs,
  kD2sPackets,
  kD2sBytes,
  kD2sMinPs,
  kD2sMaxPs,
  kD2sMeanPs,
  kD2sMeanIatMs,
  kD2sCumulativeFlags,
  kClassification,
  kCategory,
  kColumnCount
};

inline constexpr std::array<std::string_view, kColumnCount> kColumnNames = {
    "src_ip",
    "src_port",
    "dst_ip",
    "protocol",
    "ip_version",
    "bidirectional_first_seen_ms",
    "bidirectional_last_seen_ms",
    "bidirectional_duration_ms",
    "bidirectional_packets",
    "bidirectional_bytes",
    "bidirectional_min_packet_size",
    "bidirectional_max_packet_size",
    "bidirectional_mean_packet_size",
    "bidirectional_mean_packet_iat_ms",
    "bidirectional_cumulative_flags",
    "src2dst_first_seen_ms",
    "src2dst_last_seen_ms",
    "src2dst_duration_ms",
    "src2dst_packets",
    "src2dst_bytes",
    "src2dst_min_packet_size",
    "src2dst_max_packet_size",
    "src2dst_mean_packet_size",
    "src2dst_mean_packet_iat_ms",
    "src2dst_cumulative_flags",
    "dst2src_first_seen_ms",
    "dst2src_last_seen_ms",
    "dst2src_duration_ms",
    "dst2src_packets",
    "dst2src_bytes",
    "dst2src_min_packet_size",
    "dst2src_max_packet_size",
    "dst2src_mean_packet_size",
    "dst2src_mean_packet_iat_ms",
    "dst2src_cumulative_flags",
    "classification",
    "category",
};

constexpr bool is_text_column(Column c) {
  return c == kSrcIp || c == kDstIp || c == kCategory;
}

/// One bidirectional flow.
///
/// Numeric columns are held as doubles indexed by Column; a NaN marks a
/// missing cell. Every integer in the export (ports, counts, millisecond
/// timestamps) is below 2^53 and so exact. Slots of text columns are unused.
struct FlowRecord {
  std::string src_ip;
  std::string dst_ip;
  std::string category;
  std::array<double, kColumnCount> numeric{};

  double operator[](Column c) const { return numeric[c]; }
  double& operator[](Column c) { return numeric[c]; }

  double first_seen_ms() const { return numeric[kBiFirstSeenMs]; }
  bool is_anomalous() const { return numeric[kClassification] == 1.0; }

  bool operator==(const FlowRecord&) const = default;
};

}  // namespace flowvgae::flow
