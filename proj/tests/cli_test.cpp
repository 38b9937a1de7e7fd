#include "fairreg/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fairreg/report_io.hpp"

using namespace fairreg;
namespace fs = std::filesystem;

namespace {

// run_cli prints its renders; keep the test log clean and inspectable
int run(const std::vector<std::string>& args, std::string* out = nullptr,
        std::string* err = nullptr) {
  std::ostringstream captured_out;
  std::ostringstream captured_err;
  std::streambuf* old_out = std::cout.rdbuf(captured_out.rdbuf());
  std::streambuf* old_err = std::cerr.rdbuf(captured_err.rdbuf());
  const int code = run_cli(args);
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  if (out) *out = captured_out.str();
  if (err) *err = captured_err.str();
  return code;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
}

const char* kGenCfg =
    "n = 400\n"
    "d_signal = 2\n"
    "d_nuisance = 1\n"
    "d_categorical = 0\n"
    "seed = 3\n"
    "groups = g1, g2\n"
    "g1.pi = 0.2\n"
    "g1.rho = 1.0\n"
    "g2.pi = 0.15\n";

const char* kTrainCfg =
    "arch = linear\n"
    "epochs = 2\n"
    "runs = 2\n"
    "batch = 64\n"
    "min_cell = 5\n";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("generate, train, and evaluate chain through files") {
  const fs::path dir = "cli_test_tmp/pipeline";
  fs::remove_all(dir);
  write_file(dir / "gen.cfg", kGenCfg);
  write_file(dir / "train.cfg", kTrainCfg);

  std::string out;
  REQUIRE(run({"generate", "--config", (dir / "gen.cfg").string(), "--out",
               (dir / "data").string()}) == 0);
  CHECK(fs::exists(dir / "data" / "dataset.csv"));
  CHECK(fs::exists(dir / "data" / "summary.txt"));
  CHECK(read_file(dir / "data" / "summary.txt").find("group g1") != std::string::npos);

  // same seed, same bytes; new seed, new bytes
  REQUIRE(run({"generate", "--config", (dir / "gen.cfg").string(), "--out",
               (dir / "data2").string()}) == 0);
  CHECK(read_file(dir / "data" / "dataset.csv") == read_file(dir / "data2" / "dataset.csv"));
  REQUIRE(run({"generate", "--config", (dir / "gen.cfg").string(), "--out",
               (dir / "data3").string(), "--set", "seed=4"}) == 0);
  CHECK(read_file(dir / "data" / "dataset.csv") != read_file(dir / "data3" / "dataset.csv"));

  const std::string data = (dir / "data" / "dataset.csv").string();
  REQUIRE(run({"train", "--config", (dir / "train.cfg").string(), "--train", data, "--eval", data,
               "--out", (dir / "run").string()},
              &out) == 0);
  for (const char* name :
       {"report.json", "report.csv", "fpr_bins.csv", "report.txt", "history.csv", "params.json"}) {
    CHECK(fs::exists(dir / "run" / name));
  }
  CHECK(out.find("group g1") != std::string::npos);
  const MetricsReport report = load_report((dir / "run" / "report.json").string());
  CHECK(report.runs == 2);
  CHECK(report.mse.has_se);
  CHECK(read_file(dir / "run" / "history.csv").rfind("run_seed,epoch,mse\n", 0) == 0);

  REQUIRE(run({"evaluate", "--params", (dir / "run" / "params.json").string(), "--eval", data,
               "--out", (dir / "eval.json").string(), "--set", "min_cell=5"}) == 0);
  const MetricsReport single = load_report((dir / "eval.json").string());
  CHECK(single.runs == 1);
  CHECK(single.min_cell_count == 5);
  CHECK(single.groups.count("g1") == 1);

  // the report command renders both kinds of file
  REQUIRE(run({"report", (dir / "eval.json").string()}, &out) == 0);
  CHECK(out.find("threshold tau") != std::string::npos);
}

TEST_CASE("study writes the comparison and per-config tables") {
  const fs::path dir = "cli_test_tmp/study";
  fs::remove_all(dir);
  write_file(dir / "gen.cfg", kGenCfg);
  REQUIRE(run({"generate", "--config", (dir / "gen.cfg").string(), "--out",
               (dir / "data").string()}) == 0);

  write_file(dir / "protocol.cfg",
             "configs = plain, reg\n"
             "train = data/dataset.csv\n"
             "eval = data/dataset.csv\n"
             "arch = linear\n"
             "epochs = 1\n"
             "runs = 1\n"
             "batch = 64\n"
             "min_cell = 5\n"
             "reg.penalties = g1\n"
             "reg.penalty.g1.lambda = 1.0\n");
  std::string out;
  REQUIRE(run({"study", "--protocol", (dir / "protocol.cfg").string(), "--out",
               (dir / "res").string()},
              &out) == 0);
  for (const char* name : {"study.csv", "study.json", "study.txt", "plain_fpr_bins.csv",
                           "plain_report.json", "reg_fpr_bins.csv", "reg_report.json"}) {
    CHECK(fs::exists(dir / "res" / name));
  }
  CHECK(out.find("study of 2 configurations") != std::string::npos);
  CHECK(read_file(dir / "res" / "study.csv").rfind("config,metric", 0) == 0);

  REQUIRE(run({"report", (dir / "res" / "study.json").string()}, &out) == 0);
  CHECK(out.find("plain") != std::string::npos);
}

TEST_CASE("bad invocations exit nonzero and name the problem") {
  const fs::path dir = "cli_test_tmp/errors";
  fs::remove_all(dir);
  write_file(dir / "gen.cfg", kGenCfg);

  std::string out;
  std::string err;
  // unknown flag
  CHECK(run({"generate", "--config", (dir / "gen.cfg").string(), "--out", (dir / "d").string(),
             "--frobnicate"},
            &out, &err) != 0);
  // missing required option
  CHECK(run({"generate", "--config", (dir / "gen.cfg").string()}, &out, &err) != 0);
  // unknown subcommand
  CHECK(run({"transmogrify"}, &out, &err) != 0);
  // no subcommand at all
  CHECK(run({}, &out, &err) != 0);

  // unknown config key, named in the error
  CHECK(run({"generate", "--config", (dir / "gen.cfg").string(), "--out", (dir / "d").string(),
             "--set", "bogus=1"},
            &out, &err) == 1);
  CHECK(err.find("bogus") != std::string::npos);
  // malformed --set
  CHECK(run({"generate", "--config", (dir / "gen.cfg").string(), "--out", (dir / "d").string(),
             "--set", "seed"},
            &out, &err) == 1);
  CHECK(err.find("key=value") != std::string::npos);
  // missing input file, named in the error
  CHECK(run({"generate", "--config", (dir / "nope.cfg").string(), "--out", (dir / "d").string()},
            &out, &err) == 1);
  CHECK(err.find("nope.cfg") != std::string::npos);
  CHECK(run({"train", "--config", (dir / "gen.cfg").string(), "--train",
             (dir / "nope.csv").string(), "--eval", (dir / "nope.csv").string(), "--out",
             (dir / "d").string()},
            &out, &err) == 1);
  // a report file that is neither report nor study
  write_file(dir / "junk.json", "{\"format\": \"other\"}");
  CHECK(run({"report", (dir / "junk.json").string()}, &out, &err) == 1);
  CHECK(err.find("junk.json") != std::string::npos);
}

}  // TEST_SUITE
