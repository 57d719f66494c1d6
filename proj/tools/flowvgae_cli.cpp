// Command-line front end: one subcommand per pipeline stage.

#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "flowvgae/pipeline/pipeline.hpp"

namespace fp = flowvgae::pipeline;

namespace {

void add_options(CLI::App& app, fp::RunConfig& c, std::string& contamination,
                 std::string& feature_loss) {
  auto& m = c.model;
  app.add_option("--work-dir", c.work_dir, "Directory holding every artifact of the run");
  app.add_option("--flows", c.flows, "Flow file (default: <work-dir>/flows.csv)");
  app.add_option("--seed", c.root_seed, "Root seed; every random stream derives from it");
  app.add_option("--window-ms", c.window_ms, "Time window width in milliseconds");
  app.add_option("--train-fraction", c.train_fraction, "Training share per stratum");
  app.add_option("--val-fraction", c.val_fraction, "Validation share per stratum");
  app.add_option("--test-fraction", c.test_fraction, "Test share per stratum");
  app.add_option("--contamination", contamination,
                 "Anomalous-window share of the training split: 0, 3.36 or 5.76")
      ->check(CLI::IsMember({"0", "0%", "3.36", "3.36%", "5.76", "5.76%"}));
  app.add_option("--layers", m.num_layers, "Encoder aggregation layers")->check(CLI::Range(1, 2));
  app.add_option("--hidden", m.hidden, "Hidden width");
  app.add_option("--latent", m.latent, "Latent embedding width");
  app.add_option("--feature-loss", feature_loss, "Feature reconstruction loss")
      ->check(CLI::IsMember({"mse", "cosine"}));
  app.add_option("--regularizer", m.use_regularizer, "Adversarial latent regularizer");
  app.add_option("--draws", m.num_draws, "Latent draws per forward pass")->check(CLI::PositiveNumber);
  app.add_option("--kl-anneal", m.kl_anneal, "Ramp the KL weight up over the first epochs");
  app.add_option("--kl-anneal-epochs", m.kl_anneal_epochs, "Length of the KL ramp");
  app.add_option("--kl-min-weight", m.kl_min_weight, "KL weight at epoch 0");
  app.add_option("--struct-weight", m.struct_weight, "Structural loss weight in training");
  app.add_option("--feat-weight", m.feat_weight, "Feature loss weight in training");
  app.add_option("--mask-rate", m.mask_rate, "Share of connection nodes masked per step");
  app.add_option("--edge-drop-rate", m.edge_drop_rate, "Edge drop probability for message passing");
  app.add_option("--negative-rate", m.negative_rate, "Negative edges per positive edge");
  app.add_option("--max-epochs", c.max_epochs, "Epoch limit");
  app.add_option("--patience", c.patience, "Epochs without validation improvement before stopping");
  app.add_option("--lr", c.learning_rate, "AdamW learning rate");
  app.add_option("--weight-decay", c.weight_decay, "AdamW weight decay");
  app.add_option("--alpha", c.score.alpha, "Anomaly score weight of the feature channel");
  app.add_option("--beta", c.score.beta, "Anomaly score weight of the structural channel");
  app.add_option("--gamma", c.score.gamma, "Anomaly score weight of the KL channel");
  app.add_option("--score-mse", c.score.use_mse, "Score features with MSE (false: cosine)");
  app.add_option("--percentile", c.score.percentile, "Threshold percentile");
  app.add_option("--threshold-split", c.threshold_split, "Split the threshold is fit on")
      ->check(CLI::IsMember({"train", "val"}));
  app.add_option("--tuned", c.use_tuned, "Score with the configuration chosen by 'tune'");
  app.add_option("--synth-duration-s", c.synth.duration_s, "Synthetic capture length in seconds");
  app.add_option("--synth-hosts", c.synth.host_count, "Synthetic host count");
  app.add_option("--synth-rate", c.synth.benign_flow_rate, "Synthetic benign flows per second");
  app.add_option("--synth-anomalous-windows", c.synth_anomalous_windows,
                 "Windows receiving an injected attack");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-graph variational autoencoder for network anomaly detection"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "Key=value config file; command-line flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  fp::RunConfig cfg;
  std::string contamination = "0";
  std::string feature_loss = "mse";
  add_options(app, cfg, contamination, feature_loss);

  const std::map<std::string, std::string> help = {
      {"synth", "Generate a synthetic flow file"},
      {"ingest", "Clean flows, fit the encoder on the training split, encode features"},
      {"windows", "Cut windows, split them and build the graphs"},
      {"train", "Train the model with early stopping"},
      {"score", "Write per-connection anomaly scores for the test split"},
      {"tune", "Search the 216 anomaly-score configurations on the validation split"},
      {"evaluate", "Compute test metrics"},
      {"bench", "Time anomaly scoring and thresholding"}};
  std::string chosen;
  for (const auto& name : fp::stage_names()) {
    app.add_subcommand(name, help.at(name))->callback([&chosen, name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    cfg.contamination = flowvgae::windowing::parse_contamination(contamination);
    cfg.model.feature_loss = flowvgae::model::parse_feature_loss(feature_loss);
    if (chosen == "train") {
      const auto ck = fp::run_train(cfg);
      std::cout << "epochs " << ck.epochs_run << ", best validation loss " << ck.best_val_loss
                << " at epoch " << ck.best_epoch << " (untrained " << ck.initial_val_loss << ")\n";
      return 0;
    }
    fp::run_stage(chosen, cfg);
    if (chosen == "evaluate") {
      std::cout << fp::Artifacts{cfg.work_dir}.metrics().string() << "\n";
    } else if (chosen == "bench") {
      std::cout << fp::Artifacts{cfg.work_dir}.timing().string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "flowvgae " << chosen << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
