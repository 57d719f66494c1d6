#include "flowvgae/model/checkpoint.hpp"

#include <fstream>

#include "flowvgae/io/binary.hpp"

namespace flowvgae::model {

namespace {

constexpr std::string_view kMagic = "FVGMODEL";

void put_config(io::BinaryWriter& w, const ModelConfig& c) {
  w.put<std::uint64_t>(c.input_dim);
  w.put<std::int32_t>(c.num_layers);
  w.put<std::uint64_t>(c.hidden);
  w.put<std::uint64_t>(c.latent);
  w.put<std::uint8_t>(c.feature_loss == FeatureLoss::kMse ? 0 : 1);
  w.put<std::uint8_t>(c.use_regularizer);
  w.put<std::int32_t>(c.num_draws);
  w.put<std::uint8_t>(c.kl_anneal);
  w.put<std::int32_t>(c.kl_anneal_epochs);
  for (double v : {c.kl_min_weight, c.struct_weight, c.feat_weight, c.mask_rate, c.edge_drop_rate,
                   c.negative_rate, c.logvar_min, c.logvar_max}) {
    w.put(v);
  }
  w.put<std::uint64_t>(c.disc_hidden);
}

ModelConfig get_config(io::BinaryReader& r) {
  ModelConfig c;
  c.input_dim = r.get<std::uint64_t>();
  c.num_layers = r.get<std::int32_t>();
  c.hidden = r.get<std::uint64_t>();
  c.latent = r.get<std::uint64_t>();
  c.feature_loss = r.get<std::uint8_t>() == 0 ? FeatureLoss::kMse : FeatureLoss::kCosine;
  c.use_regularizer = r.get<std::uint8_t>() != 0;
  c.num_draws = r.get<std::int32_t>();
  c.kl_anneal = r.get<std::uint8_t>() != 0;
  c.kl_anneal_epochs = r.get<std::int32_t>();
  for (double* v : {&c.kl_min_weight, &c.struct_weight, &c.feat_weight, &c.mask_rate,
                    &c.edge_drop_rate, &c.negative_rate, &c.logvar_min, &c.logvar_max}) {
    *v = r.get<double>();
  }
  c.disc_hidden = r.get<std::uint64_t>();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  io::BinaryWriter w(out);
  w.put_magic(kMagic);
  w.put(Checkpoint::kVersion);
  put_config(w, ckpt.config);
  const auto& tensors = ckpt.params.tensors();
  w.put<std::uint64_t>(tensors.size());
  for (const auto& [name, t] : tensors) {
    w.put_string(name);
    w.put_array<std::uint64_t>(std::vector<std::uint64_t>(t.shape().begin(), t.shape().end()));
    w.put_array<double>(t.storage());
  }
  w.put_string(ckpt.rng_state);
  w.put<std::int32_t>(ckpt.epochs_run);
  w.put<std::int32_t>(ckpt.best_epoch);
  w.put(ckpt.best_val_loss);
  w.put(ckpt.initial_val_loss);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  io::BinaryReader r(in);
  r.expect_magic(kMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    throw io::FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config = get_config(r);
  const auto n = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    auto name = r.get_string();
    const auto dims = r.get_array<std::uint64_t>();
    numerics::Shape shape(dims.begin(), dims.end());
    ck.params.tensors()[name] = Tensor(shape, r.get_array<double>());
  }
  ck.rng_state = r.get_string();
  ck.epochs_run = r.get<std::int32_t>();
  ck.best_epoch = r.get<std::int32_t>();
  ck.best_val_loss = r.get<double>();
  ck.initial_val_loss = r.get<double>();
  return ck;
}

}  // namespace flowvgae::model
