// Runs the mmb executable and checks outputs and exit codes.

#include "fixtures.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MMB_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

fs::path write_config(const fs::path& dir, const mmb::RunConfig& cfg) {
  const fs::path path = dir / "run.cfg";
  std::ofstream(path) << cfg.to_text();
  return path;
}

}  // namespace

TEST_CASE("cli subcommands and exit codes") {
  const fs::path dir = testutil::temp_dir("cli");
  mmb::SyntheticSpec spec;
  spec.segments = 20;
  spec.length = 5;
  spec.embedding_dim = 4;
  spec.visual_dim = 2;
  spec.acoustic_dim = 2;
  mmb::RunConfig cfg = testutil::synthetic_run(dir, spec);
  cfg.iterations = 2;
  cfg.clf_epochs = 5;
  cfg.bench_segments = 20;
  cfg.bench_length = 4;
  const std::string config = "--config " + write_config(dir, cfg).string();
  const fs::path log = dir / "log.txt";

  CHECK(run("fit " + config, log) == 0);
  CHECK(testutil::slurp(log).find("fit: 20 segments") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "embeddings.tsv"));

  CHECK(run("train-eval " + config + " --label-fraction 0.5 --no-finetune --seed 0", log) == 0);
  CHECK(testutil::slurp(log).find("fine-tuned no") != std::string::npos);
  CHECK(testutil::slurp(dir / "out" / "metrics.tsv").find("\t0.5\t") != std::string::npos);

  CHECK(run("benchmark " + config + " --out " + (dir / "bench").string(), log) == 0);
  CHECK(fs::exists(dir / "bench" / "benchmark.tsv"));
  CHECK(run("histogram " + config + " --out " + (dir / "hist").string(), log) == 0);
  CHECK(fs::exists(dir / "hist" / "histogram_v.tsv"));

  CHECK(run("fit " + config + " --mode b2 --text-only --no-pe --out " + (dir / "b2").string(), log) == 0);
  const auto resolved = mmb::RunConfig::load((dir / "b2" / "resolved_config.txt").string());
  CHECK(resolved.mode == mmb::Mode::b2);
  CHECK(resolved.text_only);
  CHECK(resolved.no_pe);

  // Usage and config errors.
  CHECK(run("", log) == 1);
  CHECK(run("fit", log) == 1);
  CHECK(run("frobnicate " + config, log) == 1);
  CHECK(run("fit " + config + " --mode b9", log) == 1);
  CHECK(run("fit " + config + " --label-fraction 0", log) == 1);
  CHECK(run("fit --config " + (dir / "missing.cfg").string(), log) == 1);
  CHECK(testutil::slurp(log).find("error") != std::string::npos);

  // Data errors.
  std::ofstream(dir / "bad.jsonl") << "{\"id\": \"x\", \"tokens\": [\"a\"], \"visual_aligned\": [[1e999]]}\n";
  mmb::RunConfig bad = cfg;
  bad.dataset = (dir / "bad.jsonl").string();
  bad.out = (dir / "bad_out").string();
  const fs::path bad_dir = dir / "bad";
  fs::create_directories(bad_dir);
  CHECK(run("fit --config " + write_config(bad_dir, bad).string(), log) == 2);
  CHECK(testutil::slurp(log).find("line 1") != std::string::npos);

  // Numeric failure.
  mmb::RunConfig blowup = cfg;
  blowup.lr = 1e200;
  blowup.out = (dir / "blowup_out").string();
  const fs::path blow_dir = dir / "blowup";
  fs::create_directories(blow_dir);
  const int code = run("fit --config " + write_config(blow_dir, blowup).string(), log);
  CHECK_MESSAGE(code == 3, testutil::slurp(log));
}
