#pragma once

// Small fixed graph plus a finite-difference check of the full training loss.

#include <random>

#include "flowvgae/model/vgae.hpp"
#include "gradcheck.hpp"

namespace flowvgae::testing {

/// 3 IP nodes, 4 connection nodes: A->B, A->C, B->C, C->A.
inline graph::HetGraph toy_graph(std::size_t feature_dim, std::uint64_t seed) {
  graph::HetGraph g;
  g.ip_addresses = {"A", "B", "C"};
  const std::uint32_t flows[4][2] = {{0, 1}, {0, 2}, {1, 2}, {2, 0}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  g.conn_features = numerics::Tensor(numerics::Shape{4, feature_dim});
  for (auto& v : g.conn_features.values()) v = u(rng);
  g.conn_labels = {0, 0, 0, 1};
  for (std::uint32_t c = 0; c < 4; ++c) {
    g.edges[graph::kSrcToConn].emplace_back(flows[c][0], c);
    g.edges[graph::kConnToSrc].emplace_back(c, flows[c][0]);
    g.edges[graph::kDstToConn].emplace_back(flows[c][1], c);
    g.edges[graph::kConnToDst].emplace_back(c, flows[c][1]);
  }
  return g;
}

struct ToyGradResult {
  GradCheckResult check;
  std::size_t parameters = 0;
};

/// Builds a model with hidden = latent = 4 on the toy graph, draws every
/// stochastic input once, and compares analytic and numeric gradients of
/// the total loss for every parameter entry.
inline ToyGradResult toy_gradient_check(model::FeatureLoss kind, bool regularizer, int layers,
                                        int draws, std::uint64_t seed) {
  constexpr std::size_t kFeatures = 5;
  const auto g = toy_graph(kFeatures, seed);
  model::ModelConfig cfg;
  cfg.input_dim = kFeatures;
  cfg.hidden = 4;
  cfg.latent = 4;
  cfg.disc_hidden = 4;
  cfg.num_layers = layers;
  cfg.feature_loss = kind;
  cfg.use_regularizer = regularizer;
  cfg.num_draws = draws;
  cfg.mask_rate = 0.25;
  cfg.edge_drop_rate = 0.2;
  cfg.negative_rate = 0.5;
  std::mt19937_64 rng(seed);
  auto params = model::ModelParams::init(cfg, rng);
  // move away from the symmetric initial values so every path carries gradient
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (auto& [name, t] : params.tensors()) {
    for (auto& v : t.values()) v += jitter(rng);
  }
  const auto inputs = model::sample_training_inputs(g, cfg, rng);
  model::LossWeights w;
  w.kl_weight = 0.7;
  std::vector<numerics::Tensor*> all;
  for (auto& [name, t] : params.tensors()) all.push_back(&t);
  ToyGradResult res;
  res.parameters = all.size();
  res.check = gradcheck(all, [&](numerics::Tape& tape) {
    return model::forward(tape, g, params, cfg, inputs, w).total;
  });
  return res;
}

}  // namespace flowvgae::testing
