#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "flowvgae/graph/hetgraph.hpp"
#include "flowvgae/model/vgae.hpp"

namespace flowvgae::anomaly {

/// Weights of the three scaled loss channels plus threshold percentile.
struct ScoreConfig {
  double alpha = 1.0;  // feature channel
  double beta = 1.0;   // structural channel
  double gamma = 1.0;  // KL channel
  bool use_mse = true; // feature channel: MSE, otherwise cosine
  double percentile = 95.0;

  std::string to_string() const;
  auto operator<=>(const ScoreConfig&) const = default;
};

/// Unscaled per-connection losses of one graph. Both feature variants are
/// kept so the scoring-time choice is independent of the training loss.
struct NodeLosses {
  std::uint64_t window_id = 0;
  std::vector<double> feat_mse;
  std::vector<double> feat_cosine;
  std::vector<double> structure;
  std::vector<double> kl;
  std::vector<std::uint8_t> labels;
};

/// Inference pass: z = mu, every edge kept, no masking; negatives drawn
/// with a generator seeded from (negative_seed, window_id).
NodeLosses per_node_losses(const graph::HetGraph& g, model::ModelParams& params,
                           const model::ModelConfig& config, std::uint64_t negative_seed);

/// per_node_losses for each graph, in parallel; output order follows input.
std::vector<NodeLosses> score_graphs(const std::vector<graph::HetGraph>& graphs,
                                     model::ModelParams& params,
                                     const model::ModelConfig& config,
                                     std::uint64_t negative_seed);

/// Linear-interpolation quantile (Hyndman-Fan type 7), q in [0, 1].
double quantile(std::span<const double> values, double q);

/// (x - median) / IQR with type-7 quartiles; IQR = 0 centres only.
std::vector<double> robust_scale(std::span<const double> values);

/// Each channel robust-scaled within its own graph.
NodeLosses scale_channels(const NodeLosses& raw);

/// score_i = alpha * feat_i + beta * struct_i + gamma * kl_i on scaled channels.
std::vector<double> anomaly_score(const NodeLosses& scaled, const ScoreConfig& cfg);

struct Threshold {
  double percentile = 95.0;
  double value = 0.0;
  std::string fit_split = "train";
};

/// Type-7 percentile of the pooled scores. Throws on empty input.
Threshold fit_threshold(std::span<const double> scores, double percentile,
                        const std::string& fit_split = "train");

/// flag_i = score_i > threshold (strict).
std::vector<std::uint8_t> classify(std::span<const double> scores, const Threshold& threshold);

struct Metrics {
  double accuracy = 0.0;
  double f1_macro = 0.0;
  double recall_macro = 0.0;
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;  // anomalous = positive

  std::string to_json() const;
  bool operator==(const Metrics&) const = default;
};

/// Macro averages over the two classes. A class with no true and no
/// predicted members is left out of the macro means.
Metrics compute_metrics(std::span<const std::uint8_t> flags, std::span<const std::uint8_t> labels);

/// Probability that a random anomalous node outscores a random benign one
/// (ties count half).
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// alpha, beta, gamma in {0.1, 0.5, 1.0}, use_mse in {false, true},
/// percentile in {95, 97, 98, 99}: 216 configurations.
std::vector<ScoreConfig> default_grid();

struct GridEntry {
  ScoreConfig config;
  Threshold threshold;
  Metrics metrics;
};

struct GridResult {
  GridEntry best;
  std::vector<GridEntry> entries;  // same order as the grid
};

/// For each configuration: fit the threshold on the pooled scores of `fit`,
/// classify `eval`, and compute metrics. Returns the highest macro F1; ties
/// go to higher macro recall, then the smaller configuration.
GridResult grid_search(const std::vector<NodeLosses>& fit_scaled,
                       const std::vector<NodeLosses>& eval_scaled,
                       const std::vector<ScoreConfig>& grid,
                       const std::string& fit_split = "train");

/// Pooled scores and labels of several scaled graphs.
std::vector<double> pooled_scores(const std::vector<NodeLosses>& scaled, const ScoreConfig& cfg);
std::vector<std::uint8_t> pooled_labels(const std::vector<NodeLosses>& scaled);

/// window_id,conn_id,feat,struct,kl,score,flag,label per connection, with
/// scaled channel values.
void write_scores(std::ostream& out, const std::vector<NodeLosses>& scaled, const ScoreConfig& cfg,
                  const Threshold& threshold);

/// Mean seconds per graph for each stage. Training-side and
/// inference-side figures add the per-graph anomaly-score time to the
/// per-graph threshold fit or threshold application time.
struct TimingReport {
  double training = 0.0;
  double inference = 0.0;
  double anomaly_score = 0.0;
  double threshold_calculation = 0.0;
  double threshold_inference = 0.0;
  std::size_t fit_graphs = 0;
  std::size_t eval_graphs = 0;

  std::string to_json() const;
};

/// Single-threaded wall-clock timing. Anomaly scores are timed one graph at
/// a time; threshold fit and application are timed in aggregate and divided
/// by the graph count.
TimingReport benchmark(const std::vector<graph::HetGraph>& fit_graphs,
                       const std::vector<graph::HetGraph>& eval_graphs,
                       model::ModelParams& params, const model::ModelConfig& config,
                       const ScoreConfig& score_config, std::uint64_t negative_seed);

}  // namespace flowvgae::anomaly
