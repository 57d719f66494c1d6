#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "flowvgae/io/binary.hpp"
#include "flowvgae/model/checkpoint.hpp"
#include "flowvgae/training/training.hpp"
#include "synth_graphs.hpp"

using namespace flowvgae;
using flowvgae::testing::benign_graphs;

namespace {

struct Data {
  std::vector<graph::HetGraph> train, val;
  model::ModelConfig config;
};

Data small_data() {
  auto gs = benign_graphs(10, 0.25, 5);
  Data d;
  d.val.assign(gs.begin() + 7, gs.end());
  d.train.assign(gs.begin(), gs.begin() + 7);
  d.config.input_dim = gs.front().feature_dim();
  d.config.hidden = 8;
  d.config.latent = 8;
  return d;
}

}  // namespace

TEST_CASE("training is deterministic for a fixed seed") {
  auto d = small_data();
  training::TrainOptions opt;
  opt.max_epochs = 4;
  opt.seed = 3;
  auto a = training::train(d.train, d.val, d.config, opt);
  auto b = training::train(d.train, d.val, d.config, opt);
  REQUIRE(a.history.size() == 4);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].val_loss == b.history[i].val_loss);
  }
  CHECK(a.best_params == b.best_params);
  CHECK(a.rng_state == b.rng_state);
  CHECK_FALSE(a.stopped_early);
  CHECK(a.history[0].kl_weight == 0.0);
  CHECK(a.history[2].kl_weight == doctest::Approx(0.2));
}

TEST_CASE("returned parameters come from the best epoch") {
  auto d = small_data();
  training::TrainOptions opt;
  opt.max_epochs = 6;
  opt.seed = 9;
  auto s = training::train(d.train, d.val, d.config, opt);
  const auto best = std::min_element(s.history.begin(), s.history.end(),
                                     [](const auto& x, const auto& y) { return x.val_loss < y.val_loss; });
  CHECK(s.best_val_loss == best->val_loss);
  CHECK(s.best_epoch == best->epoch);
  auto params = s.best_params.snapshot();
  CHECK(training::validate(d.val, params, d.config, opt.val_negative_seed) == s.best_val_loss);
}

TEST_CASE("patience stops training and keeps the earlier parameters") {
  auto d = small_data();
  training::TrainOptions opt;
  opt.max_epochs = 50;
  opt.patience = 2;
  opt.adam.lr = 1e-200;
  opt.adam.weight_decay = 0.0;
  // steps far below one ulp leave parameters unchanged, so the validation loss never strictly improves after epoch 0
  auto s = training::train(d.train, d.val, d.config, opt);
  CHECK(s.stopped_early);
  CHECK(s.history.size() == 3);
  CHECK(s.best_epoch == 0);
  CHECK(s.patience_counter == 2);
  CHECK(s.best_val_loss == s.initial_val_loss);
}

TEST_CASE("validation is deterministic and transform free") {
  auto d = small_data();
  std::mt19937_64 rng(1);
  auto p = model::ModelParams::init(d.config, rng);
  const double v1 = training::validate(d.val, p, d.config, 11);
  const double v2 = training::validate(d.val, p, d.config, 11);
  CHECK(v1 == v2);
  CHECK(std::isfinite(v1));
  const auto in = model::inference_inputs(d.val[0], d.config, 11);
  CHECK(in.mask.rows.empty());
  CHECK(in.message_edges.surviving == d.val[0].edges);
  CHECK(in.eps_conn.empty());
  CHECK_THROWS_AS(training::validate({}, p, d.config, 11), std::invalid_argument);
}

TEST_CASE("training lowers the validation loss") {
  auto d = small_data();
  training::TrainOptions opt;
  opt.max_epochs = 50;
  opt.seed = 4;
  auto s = training::train(d.train, d.val, d.config, opt);
  CHECK(s.best_val_loss < s.initial_val_loss);
  CHECK(s.history.size() <= 50);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  auto d = small_data();
  d.train[2].conn_features[0] = std::numeric_limits<double>::quiet_NaN();
  training::TrainOptions opt;
  opt.max_epochs = 2;
  try {
    training::train(d.train, d.val, d.config, opt);
    FAIL("expected NonFiniteLoss");
  } catch (const training::NonFiniteLoss& e) {
    CHECK(e.epoch() == 0);
    CHECK(e.window_id() == d.train[2].window_id);
    CHECK(std::string(e.what()).find("window") != std::string::npos);
  }
}

TEST_CASE("history text") {
  std::vector<training::EpochRecord> h = {{0, 1.5, 2.5, 0.0, true}, {1, 1.0, 2.0, 0.1, true}};
  std::ostringstream out;
  training::write_history(out, h);
  CHECK(out.str() == "epoch\ttrain_loss\tval_loss\tkl_weight\n0\t1.5\t2.5\t0\n1\t1\t2\t0.10000000000000001\n");
}

TEST_CASE("checkpoint round trip is bit exact") {
  auto d = small_data();
  d.config.use_regularizer = true;
  d.config.feature_loss = model::FeatureLoss::kCosine;
  d.config.num_draws = 10;
  training::TrainOptions opt;
  opt.max_epochs = 2;
  auto s = training::train(d.train, d.val, d.config, opt);
  const auto ck = training::to_checkpoint(s, d.config);
  const auto path = std::filesystem::temp_directory_path() / "flowvgae_ckpt_test.bin";
  model::save_checkpoint(path, ck);
  const auto back = model::load_checkpoint(path);
  CHECK(back == ck);
  CHECK(back.config == d.config);
  CHECK(back.params.contains("disc.0.w"));
  std::mt19937_64 a, b;
  std::istringstream(back.rng_state) >> a;
  std::istringstream(s.rng_state) >> b;
  CHECK(a() == b());
  {
    std::ofstream(path, std::ios::binary) << "NOTACKPT";
  }
  CHECK_THROWS_AS(model::load_checkpoint(path), io::FormatError);
  std::filesystem::remove(path);
}
