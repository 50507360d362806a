#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mhccl/config.hpp"

using namespace mhccl;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& name) {
  const std::string dir = (fs::temp_directory_path() / ("mhccl_cli_" + name)).string();
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MHCCL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_SUITE_BEGIN("config_cli");

TEST_CASE("defaults match the documented values") {
  const RunConfig cfg = RunConfig::from_overrides({});
  CHECK(cfg.train.loss.tau == doctest::Approx(0.2));
  CHECK(cfg.train.batch_size == 128);
  CHECK(cfg.train.epochs == 200);
  CHECK(cfg.train.mask.strategy == MaskConfig::Strategy::mask_threshold);
  CHECK(cfg.train.mask.parameter == doctest::Approx(0.3));
  CHECK(cfg.train.lr == doctest::Approx(0.05));
  CHECK(cfg.train.ema == doctest::Approx(0.999));
}

TEST_CASE("file values override defaults, command line overrides the file") {
  const std::string dir = temp_dir("cfg");
  const std::string path = dir + "/run.cfg";
  {
    std::ofstream out(path);
    out << "# comment\n";
    out << "loss.tau=0.5\n";
    out << "train.epochs = 10\n";
  }
  const RunConfig file_only = RunConfig::from_file(path);
  CHECK(file_only.train.loss.tau == doctest::Approx(0.5));
  CHECK(file_only.train.epochs == 10);

  const RunConfig with_override = RunConfig::from_file(path, {"loss.tau=1.0"});
  CHECK(with_override.train.loss.tau == doctest::Approx(1.0));
  CHECK(with_override.train.epochs == 10);
  fs::remove_all(dir);
}

TEST_CASE("unknown keys and constraint violations are rejected by name") {
  CHECK_THROWS_WITH_AS(RunConfig::from_overrides({"nope.key=1"}),
                       doctest::Contains("nope.key"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(RunConfig::from_overrides({"mask.parameter=-1"}),
                       doctest::Contains("mask.parameter"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(RunConfig::from_overrides({"loss.tau=-0.2"}),
                       doctest::Contains("loss.tau"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::from_overrides({"train.epochs=abc"}), std::invalid_argument);
}

TEST_CASE("canonical text round-trips through the parser") {
  const RunConfig cfg = RunConfig::from_overrides({"loss.tau=0.7", "mask.strategy=none"});
  const std::string text = cfg.canonical_text();

  RunConfig back;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) back.apply_line(line);
  CHECK(back.canonical_text() == text);
}

TEST_CASE("cli: unknown subcommand exits 2, missing checkpoint exits nonzero") {
  CHECK(run_cli("frobnicate") == 2);
  const std::string dir = temp_dir("missing");
  CHECK(run_cli("demo-blobs --n 24 --classes 2 --t 12 --v 1 --file " + dir + "/d.mhc1") == 0);
  CHECK(run_cli("evaluate --data " + dir + "/d.mhc1 --checkpoint " + dir + "/none.mhck --out " +
                dir) != 0);
  fs::remove_all(dir);
}

TEST_CASE("cli: cluster reproduces the textbook 4-point example") {
  const std::string dir = temp_dir("cluster4");
  // feature file with rows 0, 1, 10, 11 (T=1, V=1)
  {
    std::ofstream out(dir + "/pts.csv");
    out << "id,t,v1\n0,0,0\n1,0,1\n2,0,10\n3,0,11\n";
  }
  REQUIRE(run_cli("cluster --data " + dir + "/pts.csv --format csv --out " + dir) == 0);
  std::ifstream in(dir + "/clusters.csv");
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line == "partition,instance_id,cluster_id,masked");
  std::vector<std::string> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(line);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "1,0,0,0");
  CHECK(rows[1] == "1,1,0,0");
  CHECK(rows[2] == "1,2,1,0");
  CHECK(rows[3] == "1,3,1,0");
  fs::remove_all(dir);
}

TEST_CASE("cli: pretrain writes checkpoint, log, and the resolved config") {
  const std::string dir = temp_dir("pretrain");
  REQUIRE(run_cli("demo-blobs --n 40 --classes 2 --t 12 --v 1 --file " + dir + "/d.mhc1") == 0);
  REQUIRE(run_cli("pretrain --data " + dir + "/d.mhc1 --out " + dir +
                  "/run -o train.epochs=1 -o train.batch_size=8 -o loss.s_neg=4") == 0);
  CHECK(fs::exists(dir + "/run/checkpoint_final.mhck"));
  CHECK(fs::exists(dir + "/run/train_log.jsonl"));
  CHECK(fs::exists(dir + "/run/config.txt"));

  REQUIRE(run_cli("evaluate --data " + dir + "/d.mhc1 --checkpoint " + dir +
                  "/run/checkpoint_final.mhck --out " + dir + "/eval -o probe.epochs=50") == 0);
  CHECK(fs::exists(dir + "/eval/metrics.json"));
  CHECK(fs::exists(dir + "/eval/confusion.csv"));
  fs::remove_all(dir);
}

TEST_CASE("cli: audit-pairs emits csv decisions and a report, then re-consumes them") {
  const std::string dir = temp_dir("audit");
  REQUIRE(run_cli("demo-blobs --n 60 --classes 3 --kind features --dim 8 --file " + dir +
                  "/f.mhc1") == 0);
  REQUIRE(run_cli("audit-pairs --data " + dir + "/f.mhc1 --out " + dir +
                  "/aud -o loss.s_pos=2 -o loss.s_neg=4") == 0);
  CHECK(fs::exists(dir + "/aud/mhccl_pairs.csv"));
  CHECK(fs::exists(dir + "/aud/baseline_pairs.csv"));
  CHECK(fs::exists(dir + "/aud/audit.json"));

  REQUIRE(run_cli("audit-pairs --data " + dir + "/f.mhc1 --pairs " + dir +
                  "/aud/mhccl_pairs.csv --baseline-pairs " + dir +
                  "/aud/baseline_pairs.csv --out " + dir + "/aud2") == 0);
  CHECK(fs::exists(dir + "/aud2/audit.json"));
  fs::remove_all(dir);
}

TEST_CASE("cli: deterministic reruns produce identical checkpoints") {
  const std::string dir = temp_dir("determ");
  REQUIRE(run_cli("demo-blobs --n 32 --classes 2 --t 12 --v 1 --file " + dir + "/d.mhc1") == 0);
  const std::string common = " --data " + dir + "/d.mhc1 -o train.epochs=1 -o "
                             "train.batch_size=8 -o loss.s_neg=4 --deterministic --seed 5 --out ";
  REQUIRE(run_cli("pretrain" + common + dir + "/a") == 0);
  REQUIRE(run_cli("pretrain" + common + dir + "/b") == 0);
  std::ifstream fa(dir + "/a/checkpoint_final.mhck", std::ios::binary);
  std::ifstream fb(dir + "/b/checkpoint_final.mhck", std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(fa)), {});
  const std::string bb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(ba == bb);
  CHECK_FALSE(ba.empty());
  fs::remove_all(dir);
}

TEST_SUITE_END();
