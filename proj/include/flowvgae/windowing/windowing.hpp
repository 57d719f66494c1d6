#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowvgae/flow/flow_record.hpp"

namespace flowvgae::windowing {

inline constexpr double kDefaultWidthMs = 180'000.0;

/// Half-open interval [start_ms, end_ms) of flow start times.
struct TimeWindow {
  std::uint64_t window_id = 0;  // floor((start - t0) / width)
  double start_ms = 0.0;
  double end_ms = 0.0;
  std::vector<std::size_t> members;  // indices into the record list, ascending
  bool is_anomalous = false;

  bool operator==(const TimeWindow&) const = default;
};

/// Assigns each record to floor((first_seen - t0) / width) where t0 is the
/// earliest first-seen time. Empty windows are not returned.
std::vector<TimeWindow> build_windows(const std::vector<flow::FlowRecord>& records,
                                      double width_ms = kDefaultWidthMs);

enum class Contamination { kNone, kNatural, kBoosted };

/// Target anomalous-window fraction: 0, 0.0336 (natural), 0.0576.
double contamination_fraction(Contamination level);
std::string to_string(Contamination level);
Contamination parse_contamination(const std::string& text);

struct SplitSpec {
  double train = 0.70;
  double val = 0.20;
  double test = 0.10;
  std::uint64_t seed = 0;
  Contamination level = Contamination::kNone;
};

struct Split {
  std::vector<TimeWindow> train;
  std::vector<TimeWindow> val;
  std::vector<TimeWindow> test;
};

/// Splits anomalous and benign windows independently. Per stratum the
/// counts are floor(fraction * n); leftovers go to train, then val, then
/// test. Each part is returned in window_id order.
Split stratified_split(const std::vector<TimeWindow>& windows, const SplitSpec& spec);

class ContaminationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kBoostedTolerance = 0.0025;

/// kNone drops anomalous windows; kNatural returns the input; kBoosted drops
/// a seeded random subset of benign windows so that the anomalous fraction
/// lands within kBoostedTolerance of 5.76%.
std::vector<TimeWindow> apply_contamination(std::vector<TimeWindow> train,
                                            Contamination level, std::uint64_t seed);

double anomalous_fraction(const std::vector<TimeWindow>& windows);

/// Text manifest: header lines with level and seed, then one
/// "window_id<TAB>split" line per window. Windows removed by contamination
/// are listed as "excluded".
void write_split_manifest(std::ostream& out, const std::vector<TimeWindow>& all,
                          const Split& split, const SplitSpec& spec);

}  // namespace flowvgae::windowing
