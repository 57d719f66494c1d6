#include "flowvgae/model/vgae.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowvgae::model {

using graph::kRelationCount;
using graph::Relation;
using numerics::Shape;

std::string to_string(FeatureLoss kind) {
  return kind == FeatureLoss::kMse ? "mse" : "cosine";
}

FeatureLoss parse_feature_loss(const std::string& text) {
  if (text == "mse") return FeatureLoss::kMse;
  if (text == "cosine") return FeatureLoss::kCosine;
  throw std::invalid_argument("unknown feature loss '" + text + "' (expected mse or cosine)");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("model config: " + what); };
  if (input_dim == 0) fail("input_dim must be set");
  if (num_layers < 1 || num_layers > 2) fail("num_layers must be 1 or 2");
  if (num_draws < 1) fail("num_draws must be >= 1");
  if (hidden == 0 || latent == 0) fail("hidden and latent must be positive");
  if (kl_anneal_epochs < 0) fail("kl_anneal_epochs must be >= 0");
  if (kl_min_weight < 0.0 || kl_min_weight > 1.0) fail("kl_min_weight must lie in [0, 1]");
  if (mask_rate < 0.0 || mask_rate > 1.0) fail("mask_rate must lie in [0, 1]");
  if (edge_drop_rate < 0.0 || edge_drop_rate >= 1.0) fail("edge_drop_rate must lie in [0, 1)");
  if (negative_rate < 0.0) fail("negative_rate must be >= 0");
  if (!(logvar_min < logvar_max)) fail("logvar clamp range is empty");
}

namespace {

std::string rel_name(const std::string& prefix, std::size_t r) {
  return prefix + ".rel" + std::to_string(r) + ".w";
}

Tensor glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Tensor t(Shape{fan_in, fan_out});
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// x * W + 1 * b
Var linear(Tape& tape, Var x, ModelParams& params, const std::string& name) {
  Var y = tape.matmul(x, tape.input(params[name + ".w"]));
  if (params.contains(name + ".b")) {
    const std::size_t rows = tape.value(x).rows();
    Var ones = tape.constant(Tensor(Shape{rows, 1}, 1.0));
    y = tape.add(y, tape.matmul(ones, tape.input(params[name + ".b"])));
  }
  return y;
}

// Aggregated messages of relation r, mapped by its weight.
Var relation_message(Tape& tape, const MessageGraph& mg, Relation r, Var source,
                     ModelParams& params, const std::string& prefix) {
  Var agg = tape.mean_aggregate(source, mg.rel[r]);
  return tape.matmul(agg, tape.input(params[rel_name(prefix, r)]));
}

Var conn_update(Tape& tape, const MessageGraph& mg, NodeVars in, ModelParams& params,
                const std::string& prefix, bool relu) {
  Var h = linear(tape, in.conn, params, prefix + ".self_conn");
  h = tape.add(h, relation_message(tape, mg, graph::kSrcToConn, in.ip, params, prefix));
  h = tape.add(h, relation_message(tape, mg, graph::kDstToConn, in.ip, params, prefix));
  return relu ? tape.relu(h) : h;
}

Var ip_update(Tape& tape, const MessageGraph& mg, NodeVars in, ModelParams& params,
              const std::string& prefix, bool relu) {
  Var h = linear(tape, in.ip, params, prefix + ".self_ip");
  h = tape.add(h, relation_message(tape, mg, graph::kConnToSrc, in.conn, params, prefix));
  h = tape.add(h, relation_message(tape, mg, graph::kConnToDst, in.conn, params, prefix));
  return relu ? tape.relu(h) : h;
}

std::vector<double> mse_per_row(const Tensor& x, const Tensor& xhat) {
  std::vector<double> out(x.rows(), 0.0);
  const std::size_t cols = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = x.at(r, c) - xhat.at(r, c);
      s += d * d;
    }
    out[r] = s * (1.0 / static_cast<double>(cols));
  }
  return out;
}

std::vector<double> cosine_per_row(const Tensor& x, const Tensor& xhat) {
  std::vector<double> out(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      dot += x.at(r, c) * xhat.at(r, c);
      nx += x.at(r, c) * x.at(r, c);
      ny += xhat.at(r, c) * xhat.at(r, c);
    }
    nx = std::sqrt(nx);
    ny = std::sqrt(ny);
    out[r] = 1.0 - ((nx > 0.0 && ny > 0.0) ? dot / (nx * ny) : 0.0);
  }
  return out;
}

Var mean_of(Tape& tape, const std::vector<Var>& terms) {
  if (terms.size() == 1) return terms.front();
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = tape.add(acc, terms[i]);
  return tape.scale(acc, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, std::mt19937_64& rng) {
  config.validate();
  ModelParams p;
  auto& t = p.tensors_;
  const std::size_t f = config.input_dim, h = config.hidden, d = config.latent;
  auto weight = [&](const std::string& name, std::size_t in, std::size_t out) {
    t[name + ".w"] = glorot(in, out, rng);
    t[name + ".b"] = Tensor(Shape{1, out});
  };
  for (int l = 0; l < config.num_layers; ++l) {
    const std::string prefix = "enc." + std::to_string(l);
    const std::size_t in = l == 0 ? f : h;
    weight(prefix + ".self_conn", in, h);
    weight(prefix + ".self_ip", in, h);
    for (std::size_t r = 0; r < kRelationCount; ++r) t[rel_name(prefix, r)] = glorot(in, h, rng);
  }
  weight("mu", h, d);
  weight("logvar", h, d);
  weight("dec.self_conn", d, h);
  t[rel_name("dec", graph::kSrcToConn)] = glorot(d, h, rng);
  t[rel_name("dec", graph::kDstToConn)] = glorot(d, h, rng);
  weight("dec.out", h, f);
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    t["struct.rel" + std::to_string(r) + ".w"] = Tensor(Shape{d, 1}, 1.0);
  }
  t["mask_token"] = Tensor(Shape{1, f});
  if (config.use_regularizer) {
    weight("disc.0", d, config.disc_hidden);
    weight("disc.1", config.disc_hidden, 1);
  }
  for (auto& [name, tensor] : t) tensor.set_requires_grad(true);
  return p;
}

Tensor& ModelParams::operator[](const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ModelParams::operator[](const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<Tensor*> ModelParams::autoencoder_params() {
  std::vector<Tensor*> out;
  for (auto& [name, t] : tensors_) {
    if (!name.starts_with("disc.")) out.push_back(&t);
  }
  return out;
}

std::vector<Tensor*> ModelParams::discriminator_params() {
  std::vector<Tensor*> out;
  for (auto& [name, t] : tensors_) {
    if (name.starts_with("disc.")) out.push_back(&t);
  }
  return out;
}

bool ModelParams::all_finite() const {
  return std::all_of(tensors_.begin(), tensors_.end(),
                     [](const auto& kv) { return kv.second.all_finite(); });
}

ModelParams ModelParams::snapshot() const {
  ModelParams p;
  for (const auto& [name, t] : tensors_) p.tensors_[name] = Tensor(t.shape(), t.storage());
  return p;
}

MessageGraph MessageGraph::build(const graph::HetGraph& g, const graph::EdgeLists& edges) {
  MessageGraph mg;
  mg.ip_count = g.ip_count();
  mg.conn_count = g.conn_count();
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    const bool from_ip = graph::ip_is_source(static_cast<Relation>(r));
    mg.rel[r] = std::make_shared<const numerics::kernels::Adjacency>(
        numerics::kernels::Adjacency::build(from_ip ? mg.ip_count : mg.conn_count,
                                            from_ip ? mg.conn_count : mg.ip_count, edges[r]));
  }
  return mg;
}

NodeVars sage_layer(Tape& tape, const MessageGraph& mg, NodeVars in, ModelParams& params,
                    const std::string& prefix, bool relu) {
  return {conn_update(tape, mg, in, params, prefix, relu),
          ip_update(tape, mg, in, params, prefix, relu)};
}

LatentVars encode(Tape& tape, const MessageGraph& mg, Var conn_input, Var ip_input,
                  ModelParams& params, const ModelConfig& config) {
  NodeVars h{conn_input, ip_input};
  for (int l = 0; l < config.num_layers; ++l) {
    h = sage_layer(tape, mg, h, params, "enc." + std::to_string(l), true);
  }
  LatentVars out;
  out.mu = {linear(tape, h.conn, params, "mu"), linear(tape, h.ip, params, "mu")};
  out.logvar = {
      tape.clamp(linear(tape, h.conn, params, "logvar"), config.logvar_min, config.logvar_max),
      tape.clamp(linear(tape, h.ip, params, "logvar"), config.logvar_min, config.logvar_max)};
  return out;
}

Var reparameterize(Tape& tape, Var mu, Var logvar, const Tensor& eps) {
  Var sigma = tape.exp(tape.scale(logvar, 0.5));
  return tape.add(mu, tape.mul(sigma, tape.constant(eps)));
}

std::vector<Tensor> sample_noise(std::size_t rows, std::size_t cols, int num_draws,
                                 std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  std::vector<Tensor> out;
  for (int d = 0; d < num_draws; ++d) {
    Tensor e(Shape{rows, cols});
    for (auto& v : e.values()) v = n01(rng);
    out.push_back(std::move(e));
  }
  return out;
}

Var decode_structure(Tape& tape, Var z_ip, Var z_conn, Var relation_weight,
                     const std::vector<graph::EdgePair>& ip_conn_pairs) {
  std::vector<std::uint32_t> ips, conns;
  ips.reserve(ip_conn_pairs.size());
  conns.reserve(ip_conn_pairs.size());
  for (auto [ip, c] : ip_conn_pairs) {
    ips.push_back(ip);
    conns.push_back(c);
  }
  Var prod = tape.mul(tape.gather_rows(z_ip, std::move(ips)),
                      tape.gather_rows(z_conn, std::move(conns)));
  return tape.matmul(prod, relation_weight);
}

double weighted_dot(std::span<const double> z_u, std::span<const double> w,
                    std::span<const double> z_v) {
  if (z_u.size() != z_v.size() || w.size() != z_u.size()) {
    throw numerics::DimensionError("weighted_dot: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < z_u.size(); ++k) acc += z_u[k] * z_v[k] * w[k];
  return acc;
}

Var decode_features(Tape& tape, const MessageGraph& mg, NodeVars z, ModelParams& params) {
  Var h = conn_update(tape, mg, z, params, "dec", true);
  return linear(tape, h, params, "dec.out");
}

Var kl_rows(Tape& tape, Var mu, Var logvar) {
  Var inner = tape.add(logvar, tape.constant(Tensor::scalar(1.0)));
  inner = tape.sub(inner, tape.mul(mu, mu));
  inner = tape.sub(inner, tape.exp(logvar));
  return tape.scale(tape.row_sum(inner), -0.5);
}

double kl_anneal_weight(int epoch, const ModelConfig& config) {
  if (epoch < 0) throw std::invalid_argument("kl_anneal_weight: negative epoch");
  if (!config.kl_anneal || epoch >= config.kl_anneal_epochs) return 1.0;
  const double t = static_cast<double>(epoch) / static_cast<double>(config.kl_anneal_epochs);
  return config.kl_min_weight + (1.0 - config.kl_min_weight) * t;
}

Var discriminator_logits(Tape& tape, Var z, ModelParams& params) {
  Var h = tape.relu(linear(tape, z, params, "disc.0"));
  return linear(tape, h, params, "disc.1");
}

AdversarialLosses discriminator_losses(Tape& tape, Var z, const Tensor& prior,
                                       ModelParams& params) {
  const Tensor& zv = tape.value(z);
  if (prior.shape() != zv.shape()) {
    throw numerics::DimensionError("discriminator: prior samples " + numerics::shape_str(prior.shape()) +
                                   " do not match latent " + numerics::shape_str(zv.shape()));
  }
  const std::size_t n = zv.rows();
  Var fake_logits = discriminator_logits(tape, z, params);
  Var real_logits = discriminator_logits(tape, tape.constant(prior), params);
  const Tensor ones(Shape{n, 1}, 1.0);
  const Tensor zeros(Shape{n, 1}, 0.0);
  Var real_term = tape.bce_with_logits(real_logits, ones);
  Var fake_term = tape.bce_with_logits(fake_logits, zeros);
  AdversarialLosses out;
  // equal row counts, so this is the mean over the concatenated batch
  out.discriminator = tape.scale(tape.add(real_term, fake_term), 0.5);
  out.generator = tape.bce_with_logits(fake_logits, ones);
  return out;
}

StochasticInputs sample_training_inputs(const graph::HetGraph& g, const ModelConfig& config,
                                        std::mt19937_64& rng) {
  StochasticInputs in;
  in.mask = graph::sample_mask_plan(g.conn_count(), config.mask_rate, rng);
  in.message_edges = graph::drop_edges(g, config.edge_drop_rate, rng);
  in.negatives = graph::sample_negative_edges(g, config.negative_rate, rng);
  in.eps_conn = sample_noise(g.conn_count(), config.latent, config.num_draws, rng);
  in.eps_ip = sample_noise(g.ip_count(), config.latent, config.num_draws, rng);
  if (config.use_regularizer) {
    in.prior = sample_noise(g.conn_count(), config.latent, 1, rng).front();
  }
  return in;
}

StochasticInputs inference_inputs(const graph::HetGraph& g, const ModelConfig& config,
                                  std::uint64_t negative_seed) {
  StochasticInputs in;
  in.message_edges = graph::keep_all_edges(g);
  std::mt19937_64 rng(negative_seed);
  in.negatives = graph::sample_negative_edges(g, config.negative_rate, rng);
  return in;
}

ForwardResult forward(Tape& tape, const graph::HetGraph& g, ModelParams& params,
                      const ModelConfig& config, const StochasticInputs& inputs,
                      const LossWeights& weights) {
  if (g.feature_dim() != config.input_dim) {
    throw numerics::DimensionError("graph feature width " + std::to_string(g.feature_dim()) +
                                   " does not match model input width " +
                                   std::to_string(config.input_dim));
  }
  const std::size_t n_conn = g.conn_count();
  const MessageGraph mg = MessageGraph::build(g, inputs.message_edges.surviving);

  Var x = tape.constant(g.conn_features);
  Var conn_in = x;
  if (!inputs.mask.rows.empty()) {
    conn_in = tape.replace_rows(x, inputs.mask.rows, tape.input(params["mask_token"]));
  }
  Var ip_in = tape.constant(Tensor(Shape{g.ip_count(), config.input_dim}, 1.0));
  const LatentVars lat = encode(tape, mg, conn_in, ip_in, params, config);

  ForwardResult res;
  LossBundle& b = res.bundle;
  Var kl_per = kl_rows(tape, lat.mu.conn, lat.logvar.conn);
  b.kl_per_node.assign(tape.value(kl_per).values().begin(), tape.value(kl_per).values().end());
  res.kl = tape.mean(kl_per);

  // structural targets: original edges as positives, sampled non-edges as negatives
  struct RelationPairs {
    std::vector<graph::EdgePair> pairs;
    Tensor targets;
    Var weight;
  };
  std::array<RelationPairs, kRelationCount> rel_pairs;
  std::size_t total_pairs = 0;
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    auto& rp = rel_pairs[r];
    for (auto e : g.edges[r]) rp.pairs.push_back(graph::as_ip_conn(static_cast<Relation>(r), e));
    const std::size_t n_pos = rp.pairs.size();
    for (auto e : inputs.negatives.pairs[r]) rp.pairs.push_back(e);
    rp.targets = Tensor(Shape{rp.pairs.size(), 1}, 0.0);
    for (std::size_t i = 0; i < n_pos; ++i) rp.targets[i] = 1.0;
    rp.weight = tape.input(params["struct.rel" + std::to_string(r) + ".w"]);
    total_pairs += rp.pairs.size();
  }
  if (total_pairs == 0) throw std::invalid_argument("forward: graph has no edges");

  const bool sampled = !inputs.eps_conn.empty();
  const std::size_t draws = sampled ? inputs.eps_conn.size() : 1;
  std::vector<Var> struct_terms, feat_terms;
  std::optional<Var> z_first;
  std::vector<double> pair_sum(n_conn, 0.0), pair_count(n_conn, 0.0);
  b.feat_mse_per_node.assign(n_conn, 0.0);
  b.feat_cosine_per_node.assign(n_conn, 0.0);
  const double inv_draws = 1.0 / static_cast<double>(draws);
  for (std::size_t d = 0; d < draws; ++d) {
    NodeVars z = sampled ? NodeVars{reparameterize(tape, lat.mu.conn, lat.logvar.conn, inputs.eps_conn[d]),
                                    reparameterize(tape, lat.mu.ip, lat.logvar.ip, inputs.eps_ip[d])}
                         : lat.mu;
    if (d == 0) {
      res.z_conn = tape.value(z.conn);
      z_first = z.conn;
    }

    std::vector<double> draw_sum(n_conn, 0.0);
    std::optional<Var> bce_total;
    for (std::size_t r = 0; r < kRelationCount; ++r) {
      auto& rp = rel_pairs[r];
      if (rp.pairs.empty()) continue;
      Var logits = decode_structure(tape, z.ip, z.conn, rp.weight, rp.pairs);
      Var bce = tape.bce_with_logits_elementwise(logits, rp.targets);
      const auto vals = tape.value(bce).values();
      for (std::size_t i = 0; i < rp.pairs.size(); ++i) {
        draw_sum[rp.pairs[i].second] += vals[i];
        if (d == 0) pair_count[rp.pairs[i].second] += 1.0;
      }
      Var s = tape.sum(bce);
      bce_total = bce_total ? tape.add(*bce_total, s) : s;
    }
    for (std::size_t i = 0; i < n_conn; ++i) pair_sum[i] += draw_sum[i];
    struct_terms.push_back(tape.scale(*bce_total, 1.0 / static_cast<double>(total_pairs)));

    Var xhat = decode_features(tape, mg, z, params);
    feat_terms.push_back(config.feature_loss == FeatureLoss::kMse
                             ? tape.mse(x, xhat)
                             : tape.cosine_embedding_loss(x, xhat));
    const auto mse_rows = mse_per_row(g.conn_features, tape.value(xhat));
    const auto cos_rows = cosine_per_row(g.conn_features, tape.value(xhat));
    for (std::size_t i = 0; i < n_conn; ++i) {
      b.feat_mse_per_node[i] += mse_rows[i] * inv_draws;
      b.feat_cosine_per_node[i] += cos_rows[i] * inv_draws;
    }
  }
  b.struct_per_node.assign(n_conn, 0.0);
  for (std::size_t i = 0; i < n_conn; ++i) {
    if (pair_count[i] > 0.0) b.struct_per_node[i] = pair_sum[i] / static_cast<double>(draws) / pair_count[i];
  }
  b.feat_per_node =
      config.feature_loss == FeatureLoss::kMse ? b.feat_mse_per_node : b.feat_cosine_per_node;

  res.struct_loss = mean_of(tape, struct_terms);
  res.feat_loss = mean_of(tape, feat_terms);

  Var total = tape.add(tape.scale(res.struct_loss, weights.struct_weight),
                       tape.scale(res.feat_loss, weights.feat_weight));
  if (weights.kl_weight != 0.0) total = tape.add(total, tape.scale(res.kl, weights.kl_weight));
  if (config.use_regularizer && weights.include_generator && inputs.prior) {
    Var fake = discriminator_logits(tape, *z_first, params);
    res.generator_loss = tape.bce_with_logits(fake, Tensor(Shape{n_conn, 1}, 1.0));
    total = tape.add(total, *res.generator_loss);
    b.generator_loss = tape.value(*res.generator_loss).item();
  }
  res.total = total;
  b.struct_loss = tape.value(res.struct_loss).item();
  b.feat_loss = tape.value(res.feat_loss).item();
  b.kl = tape.value(res.kl).item();
  b.total = tape.value(total).item();
  return res;
}

double total_loss(const LossBundle& bundle, double struct_weight, double feat_weight,
                  double kl_weight) {
  return struct_weight * bundle.struct_loss + feat_weight * bundle.feat_loss +
         kl_weight * bundle.kl + bundle.generator_loss;
}

}  // namespace flowvgae::model
