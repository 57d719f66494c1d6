#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowvgae/graph/hetgraph.hpp"
#include "flowvgae/model/checkpoint.hpp"
#include "flowvgae/model/vgae.hpp"
#include "flowvgae/numerics/adamw.hpp"

namespace flowvgae::training {

struct EpochRecord {
  int epoch = 0;  // 0-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double kl_weight = 0.0;
  bool improved = false;
};

struct TrainOptions {
  int max_epochs = 100;
  int patience = 20;
  numerics::AdamWOptions adam;  // lr 1e-3, weight decay 1e-5
  std::uint64_t seed = 0;
  std::uint64_t val_negative_seed = 0x5eed;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainState {
  int epoch = 0;  // epochs completed
  double best_val_loss = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  model::ModelParams best_params;
  int patience_counter = 0;
  double initial_val_loss = 0.0;  // validation loss of the untrained model
  bool stopped_early = false;
  std::vector<EpochRecord> history;
  std::string rng_state;  // generator state after the last epoch
};

/// Loss became NaN or infinite; what() names the epoch and window.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(int epoch, std::uint64_t window_id, const std::string& detail);
  int epoch() const noexcept { return epoch_; }
  std::uint64_t window_id() const noexcept { return window_id_; }

 private:
  int epoch_;
  std::uint64_t window_id_;
};

/// Mean total loss over graphs with no masking, no edge dropping, z = mu,
/// KL weight 1 and no adversarial term. Negatives for each graph come from
/// a generator derived from (negative_seed, window_id).
double validate(const std::vector<graph::HetGraph>& graphs, model::ModelParams& params,
                const model::ModelConfig& config, std::uint64_t negative_seed);

/// One optimizer step per graph, graphs reshuffled every epoch. Keeps the
/// parameters of the epoch with the lowest validation loss (strict
/// improvement) and stops after `patience` epochs without one.
TrainState train(const std::vector<graph::HetGraph>& train_graphs,
                 const std::vector<graph::HetGraph>& val_graphs,
                 const model::ModelConfig& config, const TrainOptions& options);

/// Tab-separated: epoch, train_loss, val_loss, kl_weight.
void write_history(std::ostream& out, const std::vector<EpochRecord>& history);

/// Packs the returned state into a checkpoint.
model::Checkpoint to_checkpoint(const TrainState& state, const model::ModelConfig& config);

}  // namespace flowvgae::training
