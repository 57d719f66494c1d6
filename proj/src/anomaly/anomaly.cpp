#include "flowvgae/anomaly/anomaly.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <omp.h>

#include "flowvgae/util/seed.hpp"

namespace flowvgae::anomaly {

std::string ScoreConfig::to_string() const {
  std::ostringstream out;
  out << "alpha=" << alpha << " beta=" << beta << " gamma=" << gamma
      << " feature=" << (use_mse ? "mse" : "cosine") << " percentile=" << percentile;
  return out.str();
}

NodeLosses per_node_losses(const graph::HetGraph& g, model::ModelParams& params,
                           const model::ModelConfig& config, std::uint64_t negative_seed) {
  const auto inputs =
      model::inference_inputs(g, config, util::derive_seed(negative_seed, g.window_id));
  numerics::Tape tape;
  auto res = model::forward(tape, g, params, config, inputs, {1.0, 1.0, 1.0, false});
  NodeLosses out;
  out.window_id = g.window_id;
  out.feat_mse = std::move(res.bundle.feat_mse_per_node);
  out.feat_cosine = std::move(res.bundle.feat_cosine_per_node);
  out.structure = std::move(res.bundle.struct_per_node);
  out.kl = std::move(res.bundle.kl_per_node);
  out.labels = g.conn_labels;
  return out;
}

std::vector<NodeLosses> score_graphs(const std::vector<graph::HetGraph>& graphs,
                                     model::ModelParams& params,
                                     const model::ModelConfig& config,
                                     std::uint64_t negative_seed) {
  std::vector<NodeLosses> out(graphs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    out[i] = per_node_losses(graphs[i], params, config, negative_seed);
  }
  return out;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty set");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile level outside [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, q);
}

std::vector<double> robust_scale(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("robust_scale: no values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double median = quantile_sorted(sorted, 0.5);
  double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  if (!(iqr > 0.0)) iqr = 1.0;
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - median) / iqr;
  return out;
}

NodeLosses scale_channels(const NodeLosses& raw) {
  NodeLosses s;
  s.window_id = raw.window_id;
  s.feat_mse = robust_scale(raw.feat_mse);
  s.feat_cosine = robust_scale(raw.feat_cosine);
  s.structure = robust_scale(raw.structure);
  s.kl = robust_scale(raw.kl);
  s.labels = raw.labels;
  return s;
}

std::vector<double> anomaly_score(const NodeLosses& scaled, const ScoreConfig& cfg) {
  const auto& feat = cfg.use_mse ? scaled.feat_mse : scaled.feat_cosine;
  if (feat.size() != scaled.structure.size() || feat.size() != scaled.kl.size()) {
    throw std::invalid_argument("anomaly_score: channel lengths differ");
  }
  std::vector<double> out(feat.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = cfg.alpha * feat[i] + cfg.beta * scaled.structure[i] + cfg.gamma * scaled.kl[i];
  }
  return out;
}

Threshold fit_threshold(std::span<const double> scores, double percentile,
                        const std::string& fit_split) {
  if (scores.empty()) throw std::invalid_argument("fit_threshold: no scores");
  if (percentile < 0.0 || percentile > 100.0) {
    throw std::invalid_argument("fit_threshold: percentile outside [0, 100]");
  }
  return {percentile, quantile(scores, percentile / 100.0), fit_split};
}

std::vector<std::uint8_t> classify(std::span<const double> scores, const Threshold& threshold) {
  std::vector<std::uint8_t> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] > threshold.value ? 1 : 0;
  return out;
}

std::string Metrics::to_json() const {
  nlohmann::ordered_json j;
  j["accuracy"] = accuracy;
  j["f1_macro"] = f1_macro;
  j["recall_macro"] = recall_macro;
  j["confusion"] = {{"tp", tp}, {"tn", tn}, {"fp", fp}, {"fn", fn}};
  return j.dump(2);
}

Metrics compute_metrics(std::span<const std::uint8_t> flags, std::span<const std::uint8_t> labels) {
  if (flags.size() != labels.size()) {
    throw std::invalid_argument("compute_metrics: " + std::to_string(flags.size()) +
                                " predictions for " + std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw std::invalid_argument("compute_metrics: no samples");
  Metrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1) throw std::invalid_argument("compute_metrics: labels must be 0 or 1");
    const bool p = flags[i] != 0, t = labels[i] != 0;
    if (p && t) ++m.tp;
    else if (!p && !t) ++m.tn;
    else if (p) ++m.fp;
    else ++m.fn;
  }
  m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(labels.size());
  // per class: (true positives, false positives, false negatives) with that class as positive
  const std::size_t cls[2][3] = {{m.tn, m.fn, m.fp}, {m.tp, m.fp, m.fn}};
  double f1_sum = 0.0, recall_sum = 0.0;
  int f1_n = 0, recall_n = 0;
  for (const auto& c : cls) {
    const double tp = static_cast<double>(c[0]), fp = static_cast<double>(c[1]),
                 fn = static_cast<double>(c[2]);
    if (tp + fp + fn > 0) {
      f1_sum += 2.0 * tp / (2.0 * tp + fp + fn);
      ++f1_n;
    }
    if (tp + fn > 0) {
      recall_sum += tp / (tp + fn);
      ++recall_n;
    }
  }
  m.f1_macro = f1_sum / f1_n;
  m.recall_macro = recall_sum / recall_n;
  return m;
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: length mismatch");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]]) {
        pos_rank_sum += avg_rank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc_auc: needs both classes");
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

std::vector<ScoreConfig> default_grid() {
  std::vector<ScoreConfig> grid;
  const double weights[] = {0.1, 0.5, 1.0};
  for (double a : weights) {
    for (double b : weights) {
      for (double g : weights) {
        for (bool mse : {false, true}) {
          for (double p : {95.0, 97.0, 98.0, 99.0}) grid.push_back({a, b, g, mse, p});
        }
      }
    }
  }
  return grid;
}

std::vector<double> pooled_scores(const std::vector<NodeLosses>& scaled, const ScoreConfig& cfg) {
  std::vector<double> out;
  for (const auto& s : scaled) {
    auto part = anomaly_score(s, cfg);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<std::uint8_t> pooled_labels(const std::vector<NodeLosses>& scaled) {
  std::vector<std::uint8_t> out;
  for (const auto& s : scaled) out.insert(out.end(), s.labels.begin(), s.labels.end());
  return out;
}

GridResult grid_search(const std::vector<NodeLosses>& fit_scaled,
                       const std::vector<NodeLosses>& eval_scaled,
                       const std::vector<ScoreConfig>& grid, const std::string& fit_split) {
  if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
  if (fit_scaled.empty() || eval_scaled.empty()) {
    throw std::invalid_argument("grid_search: needs fit and evaluation graphs");
  }
  const auto labels = pooled_labels(eval_scaled);
  GridResult res;
  res.entries.resize(grid.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto& e = res.entries[i];
    e.config = grid[i];
    e.threshold = fit_threshold(pooled_scores(fit_scaled, grid[i]), grid[i].percentile, fit_split);
    e.metrics = compute_metrics(classify(pooled_scores(eval_scaled, grid[i]), e.threshold), labels);
  }
  auto better = [](const GridEntry& a, const GridEntry& b) {
    if (a.metrics.f1_macro != b.metrics.f1_macro) return a.metrics.f1_macro > b.metrics.f1_macro;
    if (a.metrics.recall_macro != b.metrics.recall_macro) {
      return a.metrics.recall_macro > b.metrics.recall_macro;
    }
    return a.config < b.config;
  };
  res.best = res.entries.front();
  for (const auto& e : res.entries) {
    if (better(e, res.best)) res.best = e;
  }
  return res;
}

void write_scores(std::ostream& out, const std::vector<NodeLosses>& scaled, const ScoreConfig& cfg,
                  const Threshold& threshold) {
  out << "window_id,conn_id,feat,struct,kl,score,flag,label\n";
  out.precision(17);
  for (const auto& s : scaled) {
    const auto scores = anomaly_score(s, cfg);
    const auto flags = classify(scores, threshold);
    const auto& feat = cfg.use_mse ? s.feat_mse : s.feat_cosine;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      out << s.window_id << ',' << i << ',' << feat[i] << ',' << s.structure[i] << ',' << s.kl[i]
          << ',' << scores[i] << ',' << int{flags[i]} << ',' << int{s.labels[i]} << '\n';
    }
  }
}

std::string TimingReport::to_json() const {
  nlohmann::ordered_json j;
  j["unit"] = "seconds per graph";
  j["stages"] = {{"training", training},
                 {"inference", inference},
                 {"anomaly_score", anomaly_score},
                 {"threshold_calculation", threshold_calculation},
                 {"threshold_inference", threshold_inference}};
  j["fit_graphs"] = fit_graphs;
  j["eval_graphs"] = eval_graphs;
  return j.dump(2);
}

TimingReport benchmark(const std::vector<graph::HetGraph>& fit_graphs,
                       const std::vector<graph::HetGraph>& eval_graphs,
                       model::ModelParams& params, const model::ModelConfig& config,
                       const ScoreConfig& score_config, std::uint64_t negative_seed) {
  if (fit_graphs.empty() || eval_graphs.empty()) {
    throw std::invalid_argument("benchmark: needs fit and evaluation graphs");
  }
  struct SingleThread {
    int saved = omp_get_max_threads();
    SingleThread() { omp_set_num_threads(1); }
    ~SingleThread() { omp_set_num_threads(saved); }
  } single_thread;
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::duration d) {
    return static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(d).count()) * 1e-9;
  };
  // warm-up pass, not timed
  (void)anomaly_score(scale_channels(per_node_losses(fit_graphs.front(), params, config, negative_seed)),
                      score_config);

  auto score_all = [&](const std::vector<graph::HetGraph>& graphs, double& total) {
    std::vector<std::vector<double>> scores;
    for (const auto& g : graphs) {
      const auto t0 = clock::now();
      auto s = anomaly_score(scale_channels(per_node_losses(g, params, config, negative_seed)),
                             score_config);
      total += seconds(clock::now() - t0);
      scores.push_back(std::move(s));
    }
    return scores;
  };
  double fit_score_time = 0.0, eval_score_time = 0.0;
  const auto fit_scores = score_all(fit_graphs, fit_score_time);
  const auto eval_scores = score_all(eval_graphs, eval_score_time);

  std::vector<double> pooled;
  for (const auto& s : fit_scores) pooled.insert(pooled.end(), s.begin(), s.end());
  auto t0 = clock::now();
  const auto threshold = fit_threshold(pooled, score_config.percentile);
  const double fit_time = seconds(clock::now() - t0);

  std::size_t flagged = 0;
  t0 = clock::now();
  for (const auto& s : eval_scores) {
    const auto flags = classify(s, threshold);
    flagged += static_cast<std::size_t>(std::count(flags.begin(), flags.end(), 1));
  }
  const double apply_time = seconds(clock::now() - t0);
  (void)flagged;

  TimingReport r;
  r.fit_graphs = fit_graphs.size();
  r.eval_graphs = eval_graphs.size();
  const double nf = static_cast<double>(fit_graphs.size());
  const double ne = static_cast<double>(eval_graphs.size());
  r.anomaly_score = (fit_score_time + eval_score_time) / (nf + ne);
  r.threshold_calculation = fit_time / nf;
  r.threshold_inference = apply_time / ne;
  r.training = fit_score_time / nf + r.threshold_calculation;
  r.inference = eval_score_time / ne + r.threshold_inference;
  return r;
}

}  // namespace flowvgae::anomaly
