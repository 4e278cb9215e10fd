// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the covpool binary: run directories, exit codes,
// determinism and artifact structure.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <string>

#include "covpool/io.hpp"

using namespace covpool;
namespace fs = std::filesystem;

namespace {

const std::string kBin = COVPOOL_BIN;

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("covpool_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string path(const std::string& rel) const { return (dir / rel).string(); }
};

int run_cli(const std::string& args) {
  const std::string cmd = kBin + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::size_t count_substr(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + needle.size()))
    ++n;
  return n;
}

}  // namespace

TEST_CASE("zero-epoch training leaves the initialization checkpoint") {
  Workspace ws;
  const std::string a = ws.path("zero_a");
  const std::string b = ws.path("zero_b");
  REQUIRE(run_cli("train --epochs 0 --seed 5 --out " + a) == 0);
  REQUIRE(run_cli("train --epochs 0 --seed 5 --out " + b) == 0);

  CHECK(read_file(a + "/convergence.csv") == "step,epoch,lr,train_loss,eval_acc\n");
  CHECK(read_file(a + "/model.ckpt") == read_file(b + "/model.ckpt"));
  CHECK(fs::exists(a + "/config.txt"));
  CHECK(fs::exists(a + "/manifest.txt"));
}

TEST_CASE("identical config and seed reproduce byte-identical CSVs") {
  Workspace ws;
  const std::string common =
      "probe --arch conv1x1:8 --schedule const:0.03 --epochs 10 --max-steps 60 "
      "--cadence 20 --seed 9 --batch 16 --out ";
  REQUIRE(run_cli(common + ws.path("r1")) == 0);
  REQUIRE(run_cli(common + ws.path("r2")) == 0);
  CHECK(read_file(ws.path("r1/convergence.csv")) == read_file(ws.path("r2/convergence.csv")));
  CHECK(read_file(ws.path("r1/probes.csv")) == read_file(ws.path("r2/probes.csv")));
  // manifests agree on every artifact except config.txt (it embeds out_dir)
  const std::string m1 = read_file(ws.path("r1/manifest.txt"));
  const std::string m2 = read_file(ws.path("r2/manifest.txt"));
  for (const char* name : {"convergence.csv", "probes.csv", "model.ckpt", "probes.svg"}) {
    const auto line_of = [name](const std::string& m) {
      const auto pos = m.find(name);
      REQUIRE(pos != std::string::npos);
      const auto start = m.rfind('\n', pos);
      return m.substr(start == std::string::npos ? 0 : start, pos - start);
    };
    CHECK(line_of(m1) == line_of(m2));
  }
}

TEST_CASE("persisted config is self-describing with every default") {
  Workspace ws;
  const std::string cfg_path = ws.path("run.cfg");
  write_file(cfg_path, "head = gap\nepochs = 1\nmax_steps = 2\n# comment\n");
  REQUIRE(run_cli("train --config " + cfg_path + " --seed 4 --out " + ws.path("cfgrun")) == 0);
  const std::string persisted = read_file(ws.path("cfgrun/config.txt"));
  CHECK(persisted.find("head = gap") != std::string::npos);
  CHECK(persisted.find("momentum = 0.9") != std::string::npos);        // default
  CHECK(persisted.find("weight_decay = 1e-04") != std::string::npos);  // default
  CHECK(persisted.find("seed = 4") != std::string::npos);              // flag override
}

TEST_CASE("validation failures exit with code 1") {
  CHECK(run_cli("train --head avg") == 1);
  CHECK(run_cli("train --batch 0") == 1);
  Workspace ws;
  write_file(ws.path("bad.cfg"), "no_such_key = 1\n");
  CHECK(run_cli("train --config " + ws.path("bad.cfg")) == 1);
}

TEST_CASE("gradcheck exits 0 when the backward pass is exact") {
  CHECK(run_cli("gradcheck --cases 5 --seed 2") == 0);
}

TEST_CASE("schedule emits CSV and an SVG with one polyline per series") {
  Workspace ws;
  REQUIRE(run_cli("schedule --spec mobilenetv2-norm --horizon 10 --out " + ws.path("sch")) == 0);
  const std::string csv = read_file(ws.path("sch/schedule.csv"));
  CHECK(csv.rfind("epoch,lr\n0,0.045\n", 0) == 0);
  const std::string svg = read_file(ws.path("sch/schedule.svg"));
  CHECK(count_substr(svg, "<polyline") == 1);

  REQUIRE(run_cli("probe --arch conv1x1:8 --epochs 5 --max-steps 20 --cadence 10 --seed 3 "
                  "--schedule const:0.02 --out " +
                  ws.path("pr")) == 0);
  const std::string psvg = read_file(ws.path("pr/probes.svg"));
  CHECK(count_substr(psvg, "<polyline") == 3);
  CHECK(count_substr(psvg, "<polygon") == 2);  // dl and dg bands
}

TEST_CASE("compare reports the matching epoch from persisted CSVs") {
  Workspace ws;
  // hand-written runs with strictly increasing accuracy
  auto write_run = [&](const std::string& name, std::initializer_list<double> accs) {
    fs::create_directories(ws.path(name));
    std::string csv = "step,epoch,lr,train_loss,eval_acc\n";
    long step = 0, epoch = 0;
    for (double a : accs) {
      csv += std::to_string(step) + "," + std::to_string(epoch) + ",0.1,1.0," +
             format_double(a) + "\n";
      ++step;
      ++epoch;
    }
    write_file(ws.path(name + "/convergence.csv"), csv);
  };
  write_run("runA", {0.3, 0.5, 0.7, 0.9});
  write_run("runB", {0.3, 0.5, 0.7, 0.9});

  const std::string cmd = kBin + " compare --run-a " + ws.path("runA") + " --run-b " +
                          ws.path("runB") + " --out " + ws.path("cmp") + " >/dev/null 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  const std::string txt = read_file(ws.path("cmp/compare.txt"));
  // identical runs: matching epoch = final epoch (accuracy strictly increases)
  CHECK(txt.find("matching_epoch = 4") != std::string::npos);
  CHECK(count_substr(read_file(ws.path("cmp/compare.svg")), "<polyline") == 2);

  // A strictly better every epoch → matching epoch <= B's final epoch
  write_run("runC", {0.5, 0.7, 0.9, 0.95});
  const std::string cmd2 = kBin + " compare --run-a " + ws.path("runC") + " --run-b " +
                           ws.path("runB") + " --out " + ws.path("cmp2") + " >/dev/null 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd2.c_str())) == 0);
  CHECK(read_file(ws.path("cmp2/compare.txt")).find("matching_epoch = 3") != std::string::npos);
}

TEST_CASE("robustness requires existing checkpoints (exit 3)") {
  CHECK(run_cli("robustness --model /tmp/covpool_missing_a.ckpt "
                "--baseline /tmp/covpool_missing_b.ckpt") == 3);
}

TEST_CASE("robustness self-comparison scores mCE = 100") {
  Workspace ws;
  write_file(ws.path("tiny.cfg"),
             "synth.train_per_class = 4\nsynth.test_per_class = 8\nepochs = 0\n");
  REQUIRE(run_cli("train --config " + ws.path("tiny.cfg") + " --seed 8 --out " +
                  ws.path("self")) == 0);

  const std::string cmd = kBin + " robustness --model " + ws.path("self/model.ckpt") +
                          " --baseline " + ws.path("self/model.ckpt") + " --config " +
                          ws.path("tiny.cfg") + " --seed 8 --out " + ws.path("selfrob") +
                          " > " + ws.path("rob.out") + " 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  CHECK(read_file(ws.path("rob.out")).rfind("mCE 100 ", 0) == 0);
  const std::string json = read_file(ws.path("selfrob/robustness.json"));
  CHECK(json.find("\"mce\": 100.0") != std::string::npos);
}

TEST_CASE("compare on a missing run exits with an I/O code") {
  CHECK(run_cli("compare --run-a /tmp/covpool_no_such_run --run-b /tmp/covpool_no_such_run") == 3);
}
