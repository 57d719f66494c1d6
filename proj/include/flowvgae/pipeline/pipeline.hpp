#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowvgae/anomaly/anomaly.hpp"
#include "flowvgae/model/checkpoint.hpp"
#include "flowvgae/model/vgae.hpp"
#include "flowvgae/synth/synth.hpp"
#include "flowvgae/training/training.hpp"
#include "flowvgae/windowing/windowing.hpp"

namespace flowvgae::pipeline {

/// Everything a run needs. Every random choice is derived from root_seed.
struct RunConfig {
  std::filesystem::path work_dir = "run";
  std::filesystem::path flows;  // empty -> <work_dir>/flows.csv
  std::uint64_t root_seed = 42;
  double window_ms = windowing::kDefaultWidthMs;
  double train_fraction = 0.70;
  double val_fraction = 0.20;
  double test_fraction = 0.10;
  windowing::Contamination contamination = windowing::Contamination::kNone;
  model::ModelConfig model;  // input_dim is taken from the fitted encoder
  int max_epochs = 100;
  int patience = 20;
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  anomaly::ScoreConfig score;
  std::string threshold_split = "train";  // train | val
  bool use_tuned = false;  // evaluate with the tune stage's choice
  synth::SynthSpec synth;
  int synth_anomalous_windows = 0;

  /// Canonical key=value text; its SHA-256 is the config hash.
  std::string canonical() const;
  std::filesystem::path flows_path() const;
};

/// A stage was started before the stage that produces its inputs.
class MissingArtifact : public std::runtime_error {
 public:
  MissingArtifact(const std::string& stage, const std::filesystem::path& path);
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Fixed artifact names inside the work directory.
struct Artifacts {
  std::filesystem::path dir;
  std::filesystem::path clean_flows() const { return dir / "flows_clean.csv"; }
  std::filesystem::path features() const { return dir / "features.bin"; }
  std::filesystem::path encoder() const { return dir / "encoder.json"; }
  std::filesystem::path graphs(const std::string& split) const { return dir / (split + ".graphs"); }
  std::filesystem::path split_manifest() const { return dir / "split_manifest.tsv"; }
  std::filesystem::path graph_summary() const { return dir / "graph_summary.tsv"; }
  std::filesystem::path checkpoint() const { return dir / "model.ckpt"; }
  std::filesystem::path history() const { return dir / "history.tsv"; }
  std::filesystem::path scores() const { return dir / "scores_test.csv"; }
  std::filesystem::path tuned() const { return dir / "score_config.json"; }
  std::filesystem::path grid() const { return dir / "grid.tsv"; }
  std::filesystem::path metrics() const { return dir / "metrics.json"; }
  std::filesystem::path timing() const { return dir / "timing.json"; }
  std::filesystem::path manifest(const std::string& stage) const {
    return dir / ("manifest_" + stage + ".json");
  }
};

/// Sub-stream seeds of the root seed, one per random consumer.
enum class SeedStream : std::uint64_t {
  kSynth = 1,
  kSplit,
  kContamination,
  kTraining,
  kValidationNegatives,
  kScoringNegatives,
};
std::uint64_t stage_seed(const RunConfig& cfg, SeedStream stream);

/// Lowercase hex SHA-256 of a file's bytes / of a string.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_text(const std::string& text);

void run_synth(const RunConfig& cfg);
void run_ingest(const RunConfig& cfg);
void run_windows(const RunConfig& cfg);
/// Optimiser, stopping and seed settings the train stage uses.
training::TrainOptions train_options(const RunConfig& cfg);
model::Checkpoint run_train(const RunConfig& cfg);
void run_score(const RunConfig& cfg);
anomaly::GridResult run_tune(const RunConfig& cfg);
anomaly::Metrics run_evaluate(const RunConfig& cfg);
anomaly::TimingReport run_bench(const RunConfig& cfg);

/// Stage names in pipeline order.
const std::vector<std::string>& stage_names();
/// Runs one stage by name.
void run_stage(const std::string& stage, const RunConfig& cfg);

}  // namespace flowvgae::pipeline
