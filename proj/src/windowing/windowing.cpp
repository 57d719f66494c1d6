#include "flowvgae/windowing/windowing.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_set>

namespace flowvgae::windowing {

std::vector<TimeWindow> build_windows(const std::vector<flow::FlowRecord>& records,
                                      double width_ms) {
  if (!(width_ms > 0.0)) throw std::invalid_argument("window width must be positive");
  std::vector<TimeWindow> out;
  if (records.empty()) return out;
  double t0 = records.front().first_seen_ms();
  for (const auto& r : records) t0 = std::min(t0, r.first_seen_ms());

  std::map<std::uint64_t, TimeWindow> by_id;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto id = static_cast<std::uint64_t>(std::floor((records[i].first_seen_ms() - t0) / width_ms));
    auto& w = by_id[id];
    if (w.members.empty()) {
      w.window_id = id;
      w.start_ms = t0 + static_cast<double>(id) * width_ms;
      w.end_ms = w.start_ms + width_ms;
    }
    w.members.push_back(i);
    w.is_anomalous = w.is_anomalous || records[i].is_anomalous();
  }
  out.reserve(by_id.size());
  for (auto& [id, w] : by_id) out.push_back(std::move(w));
  return out;
}

double contamination_fraction(Contamination level) {
  switch (level) {
    case Contamination::kNone: return 0.0;
    case Contamination::kNatural: return 0.0336;
    case Contamination::kBoosted: return 0.0576;
  }
  return 0.0;
}

std::string to_string(Contamination level) {
  switch (level) {
    case Contamination::kNone: return "0";
    case Contamination::kNatural: return "3.36";
    case Contamination::kBoosted: return "5.76";
  }
  return "?";
}

Contamination parse_contamination(const std::string& text) {
  if (text == "0" || text == "0%" || text == "none") return Contamination::kNone;
  if (text == "3.36" || text == "3.36%" || text == "natural") return Contamination::kNatural;
  if (text == "5.76" || text == "5.76%" || text == "boosted") return Contamination::kBoosted;
  throw std::invalid_argument("unknown contamination level '" + text +
                              "' (expected 0, 3.36 or 5.76)");
}

namespace {

std::size_t floor_count(double fraction, std::size_t n) {
  // the epsilon absorbs representation error such as 0.7 * 10 = 6.9999...
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

void sort_by_id(std::vector<TimeWindow>& ws) {
  std::sort(ws.begin(), ws.end(),
            [](const TimeWindow& a, const TimeWindow& b) { return a.window_id < b.window_id; });
}

}  // namespace

Split stratified_split(const std::vector<TimeWindow>& windows, const SplitSpec& spec) {
  if (windows.empty()) throw std::invalid_argument("stratified_split: no windows");
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw std::invalid_argument("stratified_split: fractions must sum to 1");
  }
  Split split;
  std::mt19937_64 rng(spec.seed);
  for (const bool anomalous : {true, false}) {
    std::vector<const TimeWindow*> stratum;
    for (const auto& w : windows) {
      if (w.is_anomalous == anomalous) stratum.push_back(&w);
    }
    if (stratum.empty()) continue;
    std::shuffle(stratum.begin(), stratum.end(), rng);
    const std::size_t n = stratum.size();
    std::size_t counts[3] = {floor_count(spec.train, n), floor_count(spec.val, n),
                             floor_count(spec.test, n)};
    std::size_t remainder = n - (counts[0] + counts[1] + counts[2]);
    for (std::size_t k = 0; remainder > 0; k = (k + 1) % 3, --remainder) ++counts[k];
    std::size_t pos = 0;
    std::vector<TimeWindow>* parts[3] = {&split.train, &split.val, &split.test};
    for (int p = 0; p < 3; ++p) {
      for (std::size_t i = 0; i < counts[p]; ++i) parts[p]->push_back(*stratum[pos++]);
    }
  }
  sort_by_id(split.train);
  sort_by_id(split.val);
  sort_by_id(split.test);
  return split;
}

double anomalous_fraction(const std::vector<TimeWindow>& windows) {
  if (windows.empty()) return 0.0;
  const auto a = std::count_if(windows.begin(), windows.end(),
                               [](const TimeWindow& w) { return w.is_anomalous; });
  return static_cast<double>(a) / static_cast<double>(windows.size());
}

std::vector<TimeWindow> apply_contamination(std::vector<TimeWindow> train,
                                            Contamination level, std::uint64_t seed) {
  switch (level) {
    case Contamination::kNatural:
      return train;
    case Contamination::kNone:
      std::erase_if(train, [](const TimeWindow& w) { return w.is_anomalous; });
      return train;
    case Contamination::kBoosted:
      break;
  }
  const double target = contamination_fraction(level);
  std::vector<std::size_t> benign;
  std::size_t anomalous = 0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].is_anomalous) {
      ++anomalous;
    } else {
      benign.push_back(i);
    }
  }
  if (anomalous == 0) {
    throw ContaminationError(
        "cannot reach 5.76% contamination: the training split has no anomalous windows "
        "(achievable maximum 0%)");
  }
  // solve a / (a + b) = target for the benign count b
  const auto wanted = static_cast<std::size_t>(
      std::floor(static_cast<double>(anomalous) / target - static_cast<double>(anomalous)));
  if (benign.size() <= wanted) {
    const double frac = anomalous_fraction(train);
    if (std::abs(frac - target) <= kBoostedTolerance) return train;
    std::ostringstream msg;
    msg << "cannot reach 5.76% contamination by removing benign windows: the split is "
           "already at "
        << frac * 100.0 << "% with " << anomalous << " anomalous and " << benign.size()
        << " benign windows";
    throw ContaminationError(msg.str());
  }
  std::mt19937_64 rng(seed);
  std::shuffle(benign.begin(), benign.end(), rng);
  std::unordered_set<std::size_t> drop(benign.begin() + static_cast<std::ptrdiff_t>(wanted),
                                       benign.end());
  std::vector<TimeWindow> kept;
  kept.reserve(anomalous + wanted);
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!drop.contains(i)) kept.push_back(std::move(train[i]));
  }
  return kept;
}

void write_split_manifest(std::ostream& out, const std::vector<TimeWindow>& all,
                          const Split& split, const SplitSpec& spec) {
  std::map<std::uint64_t, std::string> where;
  for (const auto& w : all) where[w.window_id] = "excluded";
  for (const auto& w : split.train) where[w.window_id] = "train";
  for (const auto& w : split.val) where[w.window_id] = "val";
  for (const auto& w : split.test) where[w.window_id] = "test";
  out << "# flowvgae split manifest v1\n";
  out << "contamination\t" << to_string(spec.level) << "\n";
  out << "seed\t" << spec.seed << "\n";
  out << "fractions\t" << spec.train << "\t" << spec.val << "\t" << spec.test << "\n";
  for (const auto& [id, part] : where) out << id << "\t" << part << "\n";
}

}  // namespace flowvgae::windowing
