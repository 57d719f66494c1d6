#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "flowvgae/graph/hetgraph.hpp"
#include "flowvgae/numerics/kernels.hpp"
#include "flowvgae/numerics/tape.hpp"

namespace flowvgae::model {

using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

enum class FeatureLoss { kMse, kCosine };
std::string to_string(FeatureLoss kind);
FeatureLoss parse_feature_loss(const std::string& text);

struct ModelConfig {
  std::size_t input_dim = 0;  // connection feature width, fixed by the encoder spec
  int num_layers = 1;
  std::size_t hidden = 32;
  std::size_t latent = 32;
  FeatureLoss feature_loss = FeatureLoss::kMse;
  bool use_regularizer = false;
  int num_draws = 1;
  bool kl_anneal = true;
  int kl_anneal_epochs = 10;
  double kl_min_weight = 0.0;
  double struct_weight = 1.0;  // alpha in the training loss
  double feat_weight = 1.0;    // beta in the training loss
  double mask_rate = 0.3;
  double edge_drop_rate = 0.1;
  double negative_rate = 0.2;
  double logvar_min = -10.0;
  double logvar_max = 10.0;
  std::size_t disc_hidden = 32;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Named learnable tensors, iterated in name order.
class ModelParams {
 public:
  static ModelParams init(const ModelConfig& config, std::mt19937_64& rng);

  Tensor& operator[](const std::string& name);
  const Tensor& operator[](const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.contains(name); }
  std::map<std::string, Tensor>& tensors() { return tensors_; }
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

  /// Everything except the discriminator.
  std::vector<Tensor*> autoencoder_params();
  std::vector<Tensor*> discriminator_params();
  bool all_finite() const;

  /// Values-only copy (no gradient buffers).
  ModelParams snapshot() const;
  bool operator==(const ModelParams& other) const { return tensors_ == other.tensors_; }

 private:
  std::map<std::string, Tensor> tensors_;
};

/// Per-relation adjacencies over the edges used for message passing.
struct MessageGraph {
  std::array<std::shared_ptr<const numerics::kernels::Adjacency>, graph::kRelationCount> rel;
  std::size_t ip_count = 0;
  std::size_t conn_count = 0;

  static MessageGraph build(const graph::HetGraph& g, const graph::EdgeLists& edges);
};

struct NodeVars {
  Var conn;
  Var ip;
};

/// One heterogeneous mean-aggregation layer. Connection nodes aggregate from
/// their source and destination IPs, IP nodes from the connections they
/// originate and receive; per-relation linear maps are summed with the
/// node type's self map. `prefix` selects the parameter group.
NodeVars sage_layer(Tape& tape, const MessageGraph& mg, NodeVars in, ModelParams& params,
                    const std::string& prefix, bool relu);

struct LatentVars {
  NodeVars mu;
  NodeVars logvar;
};

LatentVars encode(Tape& tape, const MessageGraph& mg, Var conn_input, Var ip_input,
                  ModelParams& params, const ModelConfig& config);

/// z = mu + exp(0.5 * logvar) * eps with eps supplied by the caller.
Var reparameterize(Tape& tape, Var mu, Var logvar, const Tensor& eps);

/// Standard-normal noise for num_draws draws of a [rows x cols] latent.
std::vector<Tensor> sample_noise(std::size_t rows, std::size_t cols, int num_draws,
                                 std::mt19937_64& rng);

/// logit(ip, conn | r) = sum_k z_ip[k] * w_r[k] * z_conn[k] for each pair.
Var decode_structure(Tape& tape, Var z_ip, Var z_conn, Var relation_weight,
                     const std::vector<graph::EdgePair>& ip_conn_pairs);

/// Values-only weighted dot product of two latent rows.
double weighted_dot(std::span<const double> z_u, std::span<const double> w,
                    std::span<const double> z_v);

/// Reconstructs connection features: one aggregation layer latent -> hidden
/// (ReLU) followed by a linear read-out hidden -> F.
Var decode_features(Tape& tape, const MessageGraph& mg, NodeVars z, ModelParams& params);

/// Per-node KL of N(mu, exp(logvar)) against N(0, I), summed over latent
/// dimensions: [rows x 1].
Var kl_rows(Tape& tape, Var mu, Var logvar);

/// Linear ramp from kl_min_weight at epoch 0 to 1 at kl_anneal_epochs.
double kl_anneal_weight(int epoch, const ModelConfig& config);

/// Discriminator logits for latent rows: [rows x 1].
Var discriminator_logits(Tape& tape, Var z, ModelParams& params);

struct AdversarialLosses {
  Var discriminator;  // prior rows -> 1, latent rows -> 0
  Var generator;      // latent rows -> 1
};

/// prior must have the same shape as z.
AdversarialLosses discriminator_losses(Tape& tape, Var z, const Tensor& prior,
                                       ModelParams& params);

/// Everything random about one forward pass, drawn before recording so the
/// pass itself is a pure function of (graph, params, inputs).
struct StochasticInputs {
  graph::MaskPlan mask;
  graph::EdgeDropPlan message_edges;
  graph::NegativeEdgeSet negatives;
  std::vector<Tensor> eps_conn;  // one per draw; empty -> z = mu
  std::vector<Tensor> eps_ip;
  std::optional<Tensor> prior;   // regularizer prior samples for connection rows
};

StochasticInputs sample_training_inputs(const graph::HetGraph& g, const ModelConfig& config,
                                        std::mt19937_64& rng);

/// No masking, no edge dropping, z = mu; negatives drawn from a generator
/// seeded with negative_seed.
StochasticInputs inference_inputs(const graph::HetGraph& g, const ModelConfig& config,
                                  std::uint64_t negative_seed);

struct LossWeights {
  double struct_weight = 1.0;
  double feat_weight = 1.0;
  double kl_weight = 1.0;
  bool include_generator = true;
};

/// Scalar and per-connection-node loss channels. Per-node structural loss is
/// the mean BCE of all positive and negative pairs touching that connection.
struct LossBundle {
  double struct_loss = 0.0;
  double feat_loss = 0.0;
  double kl = 0.0;
  double generator_loss = 0.0;
  double total = 0.0;
  std::vector<double> struct_per_node;
  std::vector<double> feat_per_node;  // kind chosen by ModelConfig::feature_loss
  std::vector<double> feat_mse_per_node;
  std::vector<double> feat_cosine_per_node;
  std::vector<double> kl_per_node;
};

struct ForwardResult {
  Var total;
  Var struct_loss;
  Var feat_loss;
  Var kl;
  std::optional<Var> generator_loss;
  Tensor z_conn;  // first draw, values only (for the discriminator step)
  LossBundle bundle;
};

ForwardResult forward(Tape& tape, const graph::HetGraph& g, ModelParams& params,
                      const ModelConfig& config, const StochasticInputs& inputs,
                      const LossWeights& weights);

/// alpha * struct + beta * feat + kl_weight * kl (+ generator term if present).
double total_loss(const LossBundle& bundle, double struct_weight, double feat_weight,
                  double kl_weight);

}  // namespace flowvgae::model
