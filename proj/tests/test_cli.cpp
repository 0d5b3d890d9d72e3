#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using delaypmp::cli::run;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("delaypmp_cli_" + name);
  fs::remove_all(p);
  return p;
}

json read(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

// Captures std::cout for the duration of a call.
struct CoutCapture {
  std::ostringstream buf;
  std::streambuf* old;
  CoutCapture() : old(std::cout.rdbuf(buf.rdbuf())) {}
  ~CoutCapture() { std::cout.rdbuf(old); }
};

}  // namespace

TEST_CASE("simulate writes the trajectory") {
  const fs::path out = scratch("sim");
  CHECK(run({"simulate", "--spec", testsupport::problem_path("linear_delay"), "--out", out.string()}) == 0);
  std::ifstream in(out / "x.csv");
  std::string line;
  bool found = false;
  while (std::getline(in, line))
    if (line.rfind("2,", 0) == 0) {
      CHECK(std::abs(std::stod(line.substr(2)) - 3.5) <= 1e-6);
      found = true;
    }
  CHECK(found);
  CHECK(read(out / "sim_report.json")["aligned"] == true);
}

TEST_CASE("solve then check reproduces the audit") {
  const fs::path out = scratch("solve");
  const std::string spec = testsupport::problem_path("linear_delay");
  CHECK(run({"solve", "--spec", spec, "--out", out.string(), "--intervals", "100", "--seed", "5"}) == 0);
  for (const char* f : {"x.csv", "u.csv", "dx.csv", "du.csv", "multipliers.csv", "summary.json"}) CHECK(fs::exists(out / f));
  const json summary = read(out / "summary.json");
  for (const char* key : {"cost", "T", "iterations", "grad_norm", "audit"}) CHECK(summary.contains(key));
  CHECK(std::abs(summary["cost"].get<double>() - 11.0 / 6.0) <= 1e-3);
  CHECK(run({"check", "--spec", spec, "--process", out.string(), "--out", out.string(), "--seed", "5"}) == 0);
  CHECK(read(out / "audit.json") == summary["audit"]);
}

TEST_CASE("check fails for a wrong multiplier") {
  const fs::path out = scratch("wrong");
  const std::string spec = testsupport::problem_path("linear_delay");
  REQUIRE(run({"solve", "--spec", spec, "--out", out.string(), "--intervals", "40"}) <= 1);
  CHECK(run({"check", "--spec", spec, "--process", out.string(), "--out", out.string(), "--lambda", "3"}) == 1);
}

TEST_CASE("tolerance overrides decide the exit status") {
  const fs::path out = scratch("tol");
  const std::string spec = testsupport::problem_path("free_time");
  CHECK(run({"solve", "--spec", spec, "--out", out.string(), "--intervals", "10", "--bracket", "0.5,2"}) == 0);
  CHECK(run({"check", "--spec", spec, "--process", out.string(), "--out", out.string(), "--tol", "freeTimeResidual=0"}) == 1);
  CHECK(run({"check", "--spec", spec, "--process", out.string(), "--out", out.string(), "--tol", "oops"}) == 2);
}

TEST_CASE("reduce writes a loadable stacked spec") {
  const fs::path out = scratch("reduce");
  {
    CoutCapture cap;
    CHECK(run({"reduce", "--spec", testsupport::problem_path("linear_delay"), "--out", out.string()}) == 0);
  }
  CHECK(run({"simulate", "--spec", (out / "stacked.json").string(), "--out", (out / "sim").string()}) == 0);
  CHECK(run({"reduce", "--spec", testsupport::problem_path("noncommensurate"), "--out", out.string()}) == 2);
}

TEST_CASE("approx prints n") {
  CoutCapture cap;
  CHECK(run({"approx", "--delays", "1/3,1/7", "--eps", "1e-9"}) == 0);
  CHECK(cap.buf.str().rfind("n=21\n", 0) == 0);
  CHECK(run({"approx", "--delays", "1/0"}) == 2);
  CHECK(run({"approx", "--delays", "1.4142135623730951", "--eps", "1e-12", "--nmax", "10"}) == 3);
}

TEST_CASE("malformed input exits with 2") {
  const fs::path dir = scratch("bad");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << R"({"S": 0, "T": 1, "delays": [0], "n": 1, "m": 1,
    "dynamics": {"type": "linear_delay", "A": [0]}, "control_set": {"type": "ellipse"}})";
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run({"simulate", "--spec", (dir / "bad.json").string(), "--out", dir.string()}) == 2);
  CHECK(run({"simulate", "--spec", (dir / "broken.json").string(), "--out", dir.string()}) == 2);
  CHECK(run({"simulate"}) == 2);
  CHECK(run({"frobnicate"}) == 2);
}
