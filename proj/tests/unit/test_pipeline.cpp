#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "flowvgae/pipeline/pipeline.hpp"

using namespace flowvgae;
namespace fs = std::filesystem;

namespace {

pipeline::RunConfig small_run(const fs::path& dir) {
  pipeline::RunConfig cfg;
  cfg.work_dir = dir;
  cfg.synth.duration_s = 180 * 40;
  cfg.synth.benign_flow_rate = 0.3;
  cfg.synth_anomalous_windows = 8;
  cfg.model.hidden = 8;
  cfg.model.latent = 8;
  cfg.max_epochs = 3;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("a stage without its inputs names the stage to run") {
  TempDir t("flowvgae_pipeline_missing");
  auto cfg = small_run(t.path);
  try {
    pipeline::run_ingest(cfg);
    FAIL("expected MissingArtifact");
  } catch (const pipeline::MissingArtifact& e) {
    CHECK(e.stage() == "synth");
  }
  pipeline::run_synth(cfg);
  pipeline::run_ingest(cfg);
  pipeline::run_windows(cfg);
  try {
    pipeline::run_evaluate(cfg);
    FAIL("expected MissingArtifact");
  } catch (const pipeline::MissingArtifact& e) {
    CHECK(e.stage() == "train");
    CHECK(std::string(e.what()).find("train") != std::string::npos);
  }
  cfg.use_tuned = true;
  pipeline::run_train(cfg);
  CHECK_THROWS_AS(pipeline::run_evaluate(cfg), pipeline::MissingArtifact);
}

TEST_CASE("full chain is reproducible") {
  TempDir t1("flowvgae_pipeline_a"), t2("flowvgae_pipeline_b");
  auto c1 = small_run(t1.path);
  auto c2 = small_run(t2.path);
  for (const auto& stage : pipeline::stage_names()) {
    if (stage == "bench") continue;
    pipeline::run_stage(stage, c1);
    pipeline::run_stage(stage, c2);
  }
  const pipeline::Artifacts a1{t1.path}, a2{t2.path};
  CHECK(slurp(a1.scores()) == slurp(a2.scores()));
  CHECK(slurp(a1.metrics()) == slurp(a2.metrics()));
  CHECK(slurp(a1.checkpoint()) == slurp(a2.checkpoint()));
  CHECK(slurp(a1.grid()) == slurp(a2.grid()));
  CHECK(slurp(a1.manifest("evaluate")) == slurp(a2.manifest("evaluate")));
  const auto manifest = slurp(a1.manifest("train"));
  CHECK(manifest.find("config_hash") != std::string::npos);
  CHECK(manifest.find(pipeline::sha256_file(a1.checkpoint())) != std::string::npos);

  // a different root seed changes the run
  TempDir t3("flowvgae_pipeline_c");
  auto c3 = small_run(t3.path);
  c3.root_seed = 7;
  for (const auto& stage : {"synth", "ingest", "windows", "train"}) pipeline::run_stage(stage, c3);
  CHECK(slurp(pipeline::Artifacts{t3.path}.checkpoint()) != slurp(a1.checkpoint()));
}

TEST_CASE("config hash follows the configuration") {
  pipeline::RunConfig a, b;
  CHECK(a.canonical() == b.canonical());
  b.model.latent = 16;
  CHECK(a.canonical() != b.canonical());
  CHECK(pipeline::sha256_text("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("unknown stage") {
  CHECK_THROWS_AS(pipeline::run_stage("nope", pipeline::RunConfig{}), std::invalid_argument);
}
