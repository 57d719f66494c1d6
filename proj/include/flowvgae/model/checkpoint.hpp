#pragma once

#include <filesystem>
#include <string>

#include "flowvgae/model/vgae.hpp"

namespace flowvgae::model {

/// Everything needed to resume scoring or training from a saved model.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  ModelConfig config;
  ModelParams params;
  std::string rng_state;  // textual std::mt19937_64 state
  int epochs_run = 0;
  int best_epoch = -1;
  double best_val_loss = 0.0;
  double initial_val_loss = 0.0;

  bool operator==(const Checkpoint&) const = default;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace flowvgae::model
