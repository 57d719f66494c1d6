#include "flowvgae/pipeline/pipeline.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "flowvgae/flow/ingest.hpp"
#include "flowvgae/graph/hetgraph.hpp"
#include "flowvgae/model/checkpoint.hpp"
#include "flowvgae/training/training.hpp"
#include "flowvgae/util/seed.hpp"

namespace flowvgae::pipeline {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

MissingArtifact::MissingArtifact(const std::string& stage, const fs::path& path)
    : std::runtime_error("missing " + path.string() + ": run the '" + stage + "' stage first"),
      stage_(stage) {}

std::string RunConfig::canonical() const {
  std::ostringstream o;
  o.precision(17);
  const auto& m = model;
  o << "root_seed=" << root_seed << "\n"
    << "window_ms=" << window_ms << "\n"
    << "split=" << train_fraction << "," << val_fraction << "," << test_fraction << "\n"
    << "contamination=" << windowing::to_string(contamination) << "\n"
    << "num_layers=" << m.num_layers << "\nhidden=" << m.hidden << "\nlatent=" << m.latent << "\n"
    << "feature_loss=" << model::to_string(m.feature_loss) << "\n"
    << "regularizer=" << m.use_regularizer << "\nnum_draws=" << m.num_draws << "\n"
    << "kl_anneal=" << m.kl_anneal << "\nkl_anneal_epochs=" << m.kl_anneal_epochs << "\n"
    << "kl_min_weight=" << m.kl_min_weight << "\n"
    << "struct_weight=" << m.struct_weight << "\nfeat_weight=" << m.feat_weight << "\n"
    << "mask_rate=" << m.mask_rate << "\nedge_drop_rate=" << m.edge_drop_rate << "\n"
    << "negative_rate=" << m.negative_rate << "\n"
    << "max_epochs=" << max_epochs << "\npatience=" << patience << "\n"
    << "learning_rate=" << learning_rate << "\nweight_decay=" << weight_decay << "\n"
    << "score=" << score.to_string() << "\n"
    << "threshold_split=" << threshold_split << "\nuse_tuned=" << use_tuned << "\n"
    << "synth=" << synth.duration_s << "," << synth.host_count << "," << synth.benign_flow_rate
    << "," << synth_anomalous_windows << "\n";
  return o.str();
}

fs::path RunConfig::flows_path() const { return flows.empty() ? work_dir / "flows.csv" : flows; }

std::uint64_t stage_seed(const RunConfig& cfg, SeedStream stream) {
  return util::derive_seed(cfg.root_seed, static_cast<std::uint64_t>(stream));
}

namespace {

std::string hex(const unsigned char* d, unsigned n) {
  std::ostringstream o;
  for (unsigned i = 0; i < n; ++i) o << std::hex << std::setw(2) << std::setfill('0') << int{d[i]};
  return o.str();
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("sha256 init failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  void update(const char* p, std::size_t n) { EVP_DigestUpdate(ctx_, p, n); }
  std::string finish() {
    unsigned char d[EVP_MAX_MD_SIZE];
    unsigned n = 0;
    EVP_DigestFinal_ex(ctx_, d, &n);
    return hex(d, n);
  }

 private:
  EVP_MD_CTX* ctx_;
};

void require(const fs::path& p, const std::string& stage) {
  if (!fs::exists(p)) throw MissingArtifact(stage, p);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

void write_manifest(const RunConfig& cfg, const std::string& stage,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  ordered_json j;
  j["stage"] = stage;
  j["config_hash"] = sha256_text(cfg.canonical());
  j["config"] = cfg.canonical();
  ordered_json seeds;
  seeds["root"] = cfg.root_seed;
  for (auto [name, s] : {std::pair{"synth", SeedStream::kSynth}, {"split", SeedStream::kSplit},
                         {"contamination", SeedStream::kContamination},
                         {"training", SeedStream::kTraining},
                         {"validation_negatives", SeedStream::kValidationNegatives},
                         {"scoring_negatives", SeedStream::kScoringNegatives}}) {
    seeds[name] = stage_seed(cfg, s);
  }
  j["seeds"] = seeds;
  ordered_json in = ordered_json::object(), out = ordered_json::object();
  for (const auto& p : inputs) in[p.filename().string()] = sha256_file(p);
  for (const auto& p : outputs) out[p.filename().string()] = sha256_file(p);
  j["inputs"] = in;
  j["outputs"] = out;
  write_text(Artifacts{cfg.work_dir}.manifest(stage), j.dump(2) + "\n");
}

windowing::SplitSpec split_spec(const RunConfig& cfg) {
  windowing::SplitSpec s;
  s.train = cfg.train_fraction;
  s.val = cfg.val_fraction;
  s.test = cfg.test_fraction;
  s.seed = stage_seed(cfg, SeedStream::kSplit);
  s.level = cfg.contamination;
  return s;
}

// Window split with the training part already at the configured contamination.
windowing::Split split_windows(const RunConfig& cfg, const std::vector<windowing::TimeWindow>& ws) {
  auto split = windowing::stratified_split(ws, split_spec(cfg));
  split.train = windowing::apply_contamination(std::move(split.train), cfg.contamination,
                                               stage_seed(cfg, SeedStream::kContamination));
  return split;
}

std::vector<graph::HetGraph> load_graphs(const RunConfig& cfg, const std::string& split) {
  const auto p = Artifacts{cfg.work_dir}.graphs(split);
  require(p, "windows");
  return graph::read_graphs(p);
}

model::Checkpoint load_model(const RunConfig& cfg) {
  const auto p = Artifacts{cfg.work_dir}.checkpoint();
  require(p, "train");
  return model::load_checkpoint(p);
}

anomaly::ScoreConfig score_config(const RunConfig& cfg) {
  if (!cfg.use_tuned) return cfg.score;
  const auto p = Artifacts{cfg.work_dir}.tuned();
  require(p, "tune");
  std::ifstream in(p);
  const auto j = nlohmann::json::parse(in);
  const auto& c = j.at("config");
  anomaly::ScoreConfig s;
  s.alpha = c.at("alpha");
  s.beta = c.at("beta");
  s.gamma = c.at("gamma");
  s.use_mse = c.at("use_mse");
  s.percentile = c.at("percentile");
  return s;
}

struct ScoredSplits {
  std::vector<anomaly::NodeLosses> fit;   // threshold-fit split, scaled
  std::vector<anomaly::NodeLosses> val;
  std::vector<anomaly::NodeLosses> test;
};

std::vector<anomaly::NodeLosses> scaled_losses(const RunConfig& cfg, model::Checkpoint& ck,
                                               const std::string& split) {
  auto raw = anomaly::score_graphs(load_graphs(cfg, split), ck.params, ck.config,
                                   stage_seed(cfg, SeedStream::kScoringNegatives));
  for (auto& r : raw) r = anomaly::scale_channels(r);
  return raw;
}

void check_threshold_split(const RunConfig& cfg) {
  if (cfg.threshold_split != "train" && cfg.threshold_split != "val") {
    throw std::invalid_argument("threshold split must be 'train' or 'val', got '" +
                                cfg.threshold_split + "'");
  }
}

}  // namespace

std::string sha256_text(const std::string& text) {
  Sha256 h;
  h.update(text.data(), text.size());
  return h.finish();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.finish();
}

void run_synth(const RunConfig& cfg) {
  fs::create_directories(cfg.work_dir);
  auto spec = cfg.synth;
  spec.seed = stage_seed(cfg, SeedStream::kSynth);
  if (spec.anomalies.empty() && cfg.synth_anomalous_windows > 0) {
    spec.anomalies = synth::spread_anomalies(spec.window_count(), cfg.synth_anomalous_windows);
  }
  const auto out = cfg.flows_path();
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  flow::write_flows(out, synth::generate(spec));
  write_manifest(cfg, "synth", {}, {out});
}

void run_ingest(const RunConfig& cfg) {
  const Artifacts a{cfg.work_dir};
  fs::create_directories(cfg.work_dir);
  require(cfg.flows_path(), "synth");
  auto cleaned = flow::clean(flow::parse_flows(cfg.flows_path()));
  if (cleaned.records.empty()) throw std::runtime_error("ingest: no usable flows after cleaning");
  const auto windows = windowing::build_windows(cleaned.records, cfg.window_ms);
  const auto split = split_windows(cfg, windows);
  std::vector<flow::FlowRecord> fit_records;
  for (const auto& w : split.train) {
    for (auto m : w.members) fit_records.push_back(cleaned.records[m]);
  }
  if (fit_records.empty()) throw std::runtime_error("ingest: training split is empty");
  const auto spec = flow::fit_encoder(fit_records);
  flow::write_flows(a.clean_flows(), cleaned.records);
  flow::write_feature_matrix(a.features(), flow::encode_all(cleaned.records, spec));
  write_text(a.encoder(), spec.to_json() + "\n");
  if (cleaned.dropped > 0) {
    std::cerr << "ingest: dropped " << cleaned.dropped << " rows with missing or infinite values\n";
  }
  write_manifest(cfg, "ingest", {cfg.flows_path()}, {a.clean_flows(), a.features(), a.encoder()});
}

void run_windows(const RunConfig& cfg) {
  const Artifacts a{cfg.work_dir};
  require(a.clean_flows(), "ingest");
  require(a.features(), "ingest");
  const auto records = flow::parse_flows(a.clean_flows());
  const auto features = flow::read_feature_matrix(a.features());
  const auto windows = windowing::build_windows(records, cfg.window_ms);
  const auto split = split_windows(cfg, windows);
  std::vector<graph::HetGraph> all;
  std::vector<fs::path> outputs;
  for (auto [name, part] : {std::pair{"train", &split.train}, {"val", &split.val}, {"test", &split.test}}) {
    std::vector<graph::HetGraph> graphs;
    for (const auto& w : *part) graphs.push_back(graph::build_graph(w, records, features));
    graph::write_graphs(a.graphs(name), graphs);
    outputs.push_back(a.graphs(name));
    all.insert(all.end(), graphs.begin(), graphs.end());
  }
  {
    std::ofstream out(a.split_manifest());
    windowing::write_split_manifest(out, windows, split, split_spec(cfg));
  }
  write_text(a.graph_summary(), graph::summarize(all));
  outputs.push_back(a.split_manifest());
  write_manifest(cfg, "windows", {a.clean_flows(), a.features()}, outputs);
}

training::TrainOptions train_options(const RunConfig& cfg) {
  training::TrainOptions opt;
  opt.max_epochs = cfg.max_epochs;
  opt.patience = cfg.patience;
  opt.adam.lr = cfg.learning_rate;
  opt.adam.weight_decay = cfg.weight_decay;
  opt.seed = stage_seed(cfg, SeedStream::kTraining);
  opt.val_negative_seed = stage_seed(cfg, SeedStream::kValidationNegatives);
  return opt;
}

model::Checkpoint run_train(const RunConfig& cfg) {
  const Artifacts a{cfg.work_dir};
  const auto train = load_graphs(cfg, "train");
  const auto val = load_graphs(cfg, "val");
  if (train.empty() || val.empty()) {
    throw std::runtime_error("train: the train and validation splits must both be non-empty");
  }
  auto mcfg = cfg.model;
  mcfg.input_dim = train.front().feature_dim();
  const auto state = training::train(train, val, mcfg, train_options(cfg));
  auto ck = training::to_checkpoint(state, mcfg);
  model::save_checkpoint(a.checkpoint(), ck);
  {
    std::ofstream out(a.history());
    training::write_history(out, state.history);
  }
  write_manifest(cfg, "train", {a.graphs("train"), a.graphs("val")}, {a.checkpoint(), a.history()});
  return ck;
}

void run_score(const RunConfig& cfg) {
  check_threshold_split(cfg);
  const Artifacts a{cfg.work_dir};
  auto ck = load_model(cfg);
  const auto sc = score_config(cfg);
  const auto fit = scaled_losses(cfg, ck, cfg.threshold_split);
  const auto test = scaled_losses(cfg, ck, "test");
  const auto threshold =
      anomaly::fit_threshold(anomaly::pooled_scores(fit, sc), sc.percentile, cfg.threshold_split);
  std::ofstream out(a.scores());
  anomaly::write_scores(out, test, sc, threshold);
  out.close();
  write_manifest(cfg, "score", {a.checkpoint(), a.graphs(cfg.threshold_split), a.graphs("test")},
                 {a.scores()});
}

anomaly::GridResult run_tune(const RunConfig& cfg) {
  check_threshold_split(cfg);
  const Artifacts a{cfg.work_dir};
  auto ck = load_model(cfg);
  const auto fit = scaled_losses(cfg, ck, cfg.threshold_split);
  const auto val = scaled_losses(cfg, ck, "val");
  auto res = anomaly::grid_search(fit, val, anomaly::default_grid(), cfg.threshold_split);
  ordered_json j;
  const auto& b = res.best;
  j["config"] = {{"alpha", b.config.alpha},         {"beta", b.config.beta},
                 {"gamma", b.config.gamma},         {"use_mse", b.config.use_mse},
                 {"percentile", b.config.percentile}};
  j["threshold"] = {{"value", b.threshold.value}, {"fit_split", b.threshold.fit_split}};
  j["validation"] = ordered_json::parse(b.metrics.to_json());
  j["grid_size"] = res.entries.size();
  write_text(a.tuned(), j.dump(2) + "\n");
  std::ostringstream g;
  g.precision(17);
  g << "alpha\tbeta\tgamma\tuse_mse\tpercentile\tthreshold\tf1_macro\trecall_macro\taccuracy\n";
  for (const auto& e : res.entries) {
    g << e.config.alpha << '\t' << e.config.beta << '\t' << e.config.gamma << '\t'
      << e.config.use_mse << '\t' << e.config.percentile << '\t' << e.threshold.value << '\t'
      << e.metrics.f1_macro << '\t' << e.metrics.recall_macro << '\t' << e.metrics.accuracy << '\n';
  }
  write_text(a.grid(), g.str());
  write_manifest(cfg, "tune", {a.checkpoint(), a.graphs(cfg.threshold_split), a.graphs("val")},
                 {a.tuned(), a.grid()});
  return res;
}

anomaly::Metrics run_evaluate(const RunConfig& cfg) {
  check_threshold_split(cfg);
  const Artifacts a{cfg.work_dir};
  auto ck = load_model(cfg);
  const auto sc = score_config(cfg);
  const auto fit = scaled_losses(cfg, ck, cfg.threshold_split);
  const auto test = scaled_losses(cfg, ck, "test");
  const auto threshold =
      anomaly::fit_threshold(anomaly::pooled_scores(fit, sc), sc.percentile, cfg.threshold_split);
  const auto flags = anomaly::classify(anomaly::pooled_scores(test, sc), threshold);
  const auto m = anomaly::compute_metrics(flags, anomaly::pooled_labels(test));
  ordered_json j = ordered_json::parse(m.to_json());
  j["score_config"] = sc.to_string();
  j["threshold"] = {{"value", threshold.value}, {"percentile", threshold.percentile},
                    {"fit_split", threshold.fit_split}};
  write_text(a.metrics(), j.dump(2) + "\n");
  std::vector<fs::path> inputs = {a.checkpoint(), a.graphs(cfg.threshold_split), a.graphs("test")};
  if (cfg.use_tuned) inputs.push_back(a.tuned());
  write_manifest(cfg, "evaluate", inputs, {a.metrics()});
  return m;
}

anomaly::TimingReport run_bench(const RunConfig& cfg) {
  check_threshold_split(cfg);
  const Artifacts a{cfg.work_dir};
  auto ck = load_model(cfg);
  const auto report =
      anomaly::benchmark(load_graphs(cfg, cfg.threshold_split), load_graphs(cfg, "test"), ck.params,
                         ck.config, score_config(cfg), stage_seed(cfg, SeedStream::kScoringNegatives));
  write_text(a.timing(), report.to_json() + "\n");
  write_manifest(cfg, "bench", {a.checkpoint(), a.graphs(cfg.threshold_split), a.graphs("test")},
                 {a.timing()});
  return report;
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"synth", "ingest",   "windows", "train",
                                                 "score", "tune", "evaluate", "bench"};
  return names;
}

void run_stage(const std::string& stage, const RunConfig& cfg) {
  if (stage == "synth") run_synth(cfg);
  else if (stage == "ingest") run_ingest(cfg);
  else if (stage == "windows") run_windows(cfg);
  else if (stage == "train") run_train(cfg);
  else if (stage == "score") run_score(cfg);
  else if (stage == "tune") run_tune(cfg);
  else if (stage == "evaluate") run_evaluate(cfg);
  else if (stage == "bench") run_bench(cfg);
  else throw std::invalid_argument("unknown stage '" + stage + "'");
}

}  // namespace flowvgae::pipeline
