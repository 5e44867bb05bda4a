#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

#include "doctest.h"
#include "pfnet/data/cloud_io.hpp"
#include "test_util.hpp"

using namespace pfnet;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run(const test::TempDir& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.path().string() + "' && '" PFNET_CLI_PATH "' " + args +
                          " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = test::read_file(out);
  r.err = test::read_file(err);
  return r;
}

void tree_equal(const fs::path& a, const fs::path& b) {
  std::size_t count_a = 0, count_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++count_a;
    const fs::path rel = fs::relative(e.path(), a);
    INFO(rel.string());
    CHECK(test::read_file(e.path()) == test::read_file(b / rel));
  }
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) ++count_b;
  CHECK(count_a == count_b);
}

const char* kSmallData = "--n-points 128 --shapes-per-category 4 --categories sphere,box --seed 4";
const char* kSmallTrain =
    "--data d --iterations 3 --batch-size 2 --width-divisor 16 --disc-width-divisor 16 "
    "--m1 4 --m2 8 --log-timing 0 --seed 7";

// Rows of a CSV file after the header, one string per line.
std::vector<std::string> csv_rows(const fs::path& path) {
  std::istringstream in(test::read_file(path));
  std::vector<std::string> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) rows.push_back(line);
  return rows;
}

std::string column(const std::string& row, std::size_t index) {
  std::istringstream in(row);
  std::string cell;
  for (std::size_t i = 0; i <= index; ++i) std::getline(in, cell, ',');
  return cell;
}

}  // namespace

TEST_CASE("gen-data writes a reproducible dataset") {
  test::TempDir dir("cli_gen");
  REQUIRE(run(dir, std::string("gen-data --out d1 ") + kSmallData).exit_code == 0);
  REQUIRE(run(dir, std::string("gen-data --out d2 ") + kSmallData).exit_code == 0);
  tree_equal(dir / "d1", dir / "d2");
  CHECK(fs::exists(dir / "d1" / "run_config.txt"));
  CHECK(fs::exists(dir / "d1" / "manifest.csv"));

  REQUIRE(run(dir, "gen-data --config d1/run_config.txt --out d3").exit_code == 0);
  tree_equal(dir / "d1", dir / "d3");
}

TEST_CASE("gen-data ratio and hole flags") {
  test::TempDir dir("cli_ratio");
  REQUIRE(run(dir, std::string("gen-data --out d --missing-ratio 0.75 --holes 2 ") + kSmallData)
              .exit_code == 0);
  for (const auto& e : fs::recursive_directory_iterator(dir / "d" / "train")) {
    const std::string name = e.path().filename().string();
    if (name.ends_with(".missing.xyz")) CHECK(data::read_cloud(e.path()).size() == 96);
    if (name.ends_with(".partial.xyz")) CHECK(data::read_cloud(e.path()).size() == 32);
  }
  const auto bad = run(dir, "gen-data --out bad --missing-ratio 1.5");
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.rfind("pfnet: usage error:", 0) == 0);
}

TEST_CASE("train is deterministic, replayable and honours --vanilla") {
  test::TempDir dir("cli_train");
  REQUIRE(run(dir, std::string("gen-data --out d ") + kSmallData).exit_code == 0);
  REQUIRE(run(dir, std::string("train --out t1 ") + kSmallTrain).exit_code == 0);
  REQUIRE(run(dir, std::string("train --out t2 ") + kSmallTrain).exit_code == 0);
  CHECK(test::read_file(dir / "t1" / "train_log.csv") == test::read_file(dir / "t2" / "train_log.csv"));
  CHECK(test::read_file(dir / "t1" / "last.pfn") == test::read_file(dir / "t2" / "last.pfn"));
  const auto rows = csv_rows(dir / "t1" / "train_log.csv");
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) CHECK(column(r, 6) != "0");

  REQUIRE(run(dir, "train --config t1/run_config.txt --out t3").exit_code == 0);
  CHECK(test::read_file(dir / "t1" / "train_log.csv") == test::read_file(dir / "t3" / "train_log.csv"));

  REQUIRE(run(dir, std::string("train --out v --vanilla ") + kSmallTrain).exit_code == 0);
  for (const auto& r : csv_rows(dir / "v" / "train_log.csv")) {
    CHECK(column(r, 5) == "0");
    CHECK(column(r, 6) == "0");
  }
}

TEST_CASE("complete passes the input through and emits the stages") {
  test::TempDir dir("cli_complete");
  REQUIRE(run(dir, std::string("gen-data --out d ") + kSmallData).exit_code == 0);
  REQUIRE(run(dir, std::string("train --out t --vanilla ") + kSmallTrain).exit_code == 0);
  fs::path input;
  for (const auto& e : fs::recursive_directory_iterator(dir / "d" / "test"))
    if (e.path().filename().string().ends_with(".partial.xyz")) input = e.path();
  REQUIRE_FALSE(input.empty());

  const auto r = run(dir, "complete --checkpoint t/last.pfn --input '" + input.string() +
                              "' --out c --emit-stages --n-points 128");
  REQUIRE(r.exit_code == 0);
  const auto partial = data::read_cloud(input);
  const auto merged = data::read_cloud(dir / "c" / "merged.ply");
  const auto missing = data::read_cloud(dir / "c" / "missing.ply");
  REQUIRE(merged.size() == 128);
  CHECK(missing.size() == 32);
  for (std::size_t i = 0; i < partial.size(); ++i) CHECK(merged[i] == partial[i]);
  CHECK(data::read_cloud(dir / "c" / "primary.ply").size() == 4);
  CHECK(data::read_cloud(dir / "c" / "secondary.ply").size() == 8);

  const auto xyz = run(dir, "complete --checkpoint t/last.pfn --input '" + input.string() +
                                "' --out cx --format xyz");
  CHECK(xyz.exit_code == 0);
  CHECK(fs::exists(dir / "cx" / "merged.xyz"));

  const auto wrong = run(dir, "complete --checkpoint t/last.pfn --input '" + input.string() +
                                  "' --out c2 --n-points 2048");
  CHECK(wrong.exit_code == 2);
  CHECK(wrong.err.rfind("pfnet: configuration error:", 0) == 0);
}

TEST_CASE("eval with the oracle reports zeros in both modes") {
  test::TempDir dir("cli_eval");
  REQUIRE(run(dir, std::string("gen-data --out d ") + kSmallData).exit_code == 0);
  REQUIRE(run(dir, "eval --data d --oracle --out e").exit_code == 0);
  const auto rows = csv_rows(dir / "e" / "report.csv");
  bool saw_overall = false, saw_missing = false;
  for (const auto& r : rows) {
    saw_overall |= r.rfind("overall,", 0) == 0;
    saw_missing |= r.rfind("missing,", 0) == 0;
    CHECK(column(r, 3) == "0");
    CHECK(column(r, 4) == "0");
  }
  CHECK(saw_overall);
  CHECK(saw_missing);
  CHECK(test::read_file(dir / "e" / "report.txt").find("scaled by 1000") != std::string::npos);
}

TEST_CASE("bench reports exactness") {
  test::TempDir dir("cli_bench");
  const auto r = run(dir, "bench --sizes 512 --repeats 1");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("exact") != std::string::npos);
  CHECK(r.out.find("yes") != std::string::npos);
  CHECK(r.out.find(" no") == std::string::npos);
}

TEST_CASE("errors carry a stable prefix and exit code") {
  test::TempDir dir("cli_err");
  const auto missing = run(dir, "train --data nowhere --out t");
  CHECK(missing.exit_code == 2);
  CHECK(missing.err.rfind("pfnet: io error:", 0) == 0);
  CHECK(run(dir, "gen-data --bogus").exit_code != 0);
  CHECK(run(dir, "frobnicate").exit_code != 0);
  const auto cfg = run(dir, "gen-data --config nope.txt");
  CHECK(cfg.exit_code == 2);
  CHECK(cfg.err.rfind("pfnet: ", 0) == 0);
}
