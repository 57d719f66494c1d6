#include "flowvgae/training/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "flowvgae/util/seed.hpp"

namespace flowvgae::training {

NonFiniteLoss::NonFiniteLoss(int epoch, std::uint64_t window_id, const std::string& detail)
    : std::runtime_error("non-finite " + detail + " at epoch " + std::to_string(epoch) +
                         ", window " + std::to_string(window_id)),
      epoch_(epoch),
      window_id_(window_id) {}

double validate(const std::vector<graph::HetGraph>& graphs, model::ModelParams& params,
                const model::ModelConfig& config, std::uint64_t negative_seed) {
  if (graphs.empty()) throw std::invalid_argument("validate: no graphs");
  std::vector<double> losses(graphs.size());
  model::LossWeights w{config.struct_weight, config.feat_weight, 1.0, false};
  // parameters are only read here, so graphs can be scored concurrently
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto& g = graphs[i];
    const auto inputs = model::inference_inputs(g, config, util::derive_seed(negative_seed, g.window_id));
    numerics::Tape tape;
    losses[i] = model::forward(tape, g, params, config, inputs, w).bundle.total;
  }
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

TrainState train(const std::vector<graph::HetGraph>& train_graphs,
                 const std::vector<graph::HetGraph>& val_graphs,
                 const model::ModelConfig& config, const TrainOptions& options) {
  if (train_graphs.empty()) throw std::invalid_argument("train: no training graphs");
  if (val_graphs.empty()) throw std::invalid_argument("train: no validation graphs");
  if (options.max_epochs < 1 || options.patience < 1) {
    throw std::invalid_argument("train: max_epochs and patience must be positive");
  }
  config.validate();
  std::mt19937_64 rng(options.seed);
  TrainState state;
  auto params = model::ModelParams::init(config, rng);
  numerics::AdamW ae_opt(params.autoencoder_params(), options.adam);
  std::optional<numerics::AdamW> disc_opt;
  if (config.use_regularizer) disc_opt.emplace(params.discriminator_params(), options.adam);

  state.initial_val_loss = validate(val_graphs, params, config, options.val_negative_seed);
  std::vector<std::size_t> order(train_graphs.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    const double klw = model::kl_anneal_weight(epoch, config);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (auto gi : order) {
      const auto& g = train_graphs[gi];
      const auto inputs = model::sample_training_inputs(g, config, rng);
      numerics::Tape tape;
      ae_opt.zero_grad();
      auto res = model::forward(tape, g, params, config, inputs,
                                {config.struct_weight, config.feat_weight, klw, true});
      if (!std::isfinite(res.bundle.total)) throw NonFiniteLoss(epoch, g.window_id, "loss");
      tape.backward(res.total);
      try {
        ae_opt.step();
      } catch (const numerics::NonFiniteGradient&) {
        throw NonFiniteLoss(epoch, g.window_id, "gradient");
      }
      if (disc_opt) {
        // the autoencoder pass left generator-side gradients in these buffers
        disc_opt->zero_grad();
        numerics::Tape dt;
        auto adv = model::discriminator_losses(dt, dt.constant(res.z_conn), *inputs.prior, params);
        dt.backward(adv.discriminator);
        try {
          disc_opt->step();
        } catch (const numerics::NonFiniteGradient&) {
          throw NonFiniteLoss(epoch, g.window_id, "discriminator gradient");
        }
      }
      loss_sum += res.bundle.total;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.kl_weight = klw;
    rec.train_loss = loss_sum / static_cast<double>(train_graphs.size());
    rec.val_loss = validate(val_graphs, params, config, options.val_negative_seed);
    if (!std::isfinite(rec.val_loss)) {
      throw NonFiniteLoss(epoch, val_graphs.front().window_id, "validation loss");
    }
    rec.improved = rec.val_loss < state.best_val_loss;
    if (rec.improved) {
      state.best_val_loss = rec.val_loss;
      state.best_epoch = epoch;
      state.best_params = params.snapshot();
      state.patience_counter = 0;
    } else {
      ++state.patience_counter;
    }
    state.history.push_back(rec);
    state.epoch = epoch + 1;
    if (options.on_epoch) options.on_epoch(rec);
    if (state.patience_counter >= options.patience) {
      state.stopped_early = true;
      break;
    }
  }
  std::ostringstream rs;
  rs << rng;
  state.rng_state = rs.str();
  return state;
}

void write_history(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch\ttrain_loss\tval_loss\tkl_weight\n";
  out.precision(17);
  for (const auto& h : history) {
    out << h.epoch << '\t' << h.train_loss << '\t' << h.val_loss << '\t' << h.kl_weight << '\n';
  }
}

model::Checkpoint to_checkpoint(const TrainState& state, const model::ModelConfig& config) {
  model::Checkpoint ck;
  ck.config = config;
  ck.params = state.best_params.snapshot();
  ck.rng_state = state.rng_state;
  ck.epochs_run = state.epoch;
  ck.best_epoch = state.best_epoch;
  ck.best_val_loss = state.best_val_loss;
  ck.initial_val_loss = state.initial_val_loss;
  return ck;
}

}  // namespace flowvgae::training
