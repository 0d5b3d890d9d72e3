#include <cmath>
#include <filesystem>
#include <fstream>

#include "delaypmp/ddesim.hpp"
#include "delaypmp/errors.hpp"
#include "delaypmp/io.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace delaypmp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("delaypmp_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string field_of(const json& doc) {
  try {
    io::parse_problem(doc);
  } catch (const SpecError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("every catalog problem parses") {
  for (const auto& entry : fs::directory_iterator(DELAYPMP_PROBLEMS_DIR)) {
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(io::load_problem(entry.path()));
  }
}

TEST_CASE("parser fills derived fields") {
  const ProblemSpec lq = testsupport::problem("lq_delay_mixed");
  CHECK(lq.delays.count() == 3);
  CHECK(lq.usesDelayedControls);
  CHECK(lq.lipschitz);
  const ProblemSpec ld = testsupport::problem("linear_delay");
  CHECK_FALSE(ld.usesDelayedControls);
  CHECK(ld.tolerances.at("adjointDefect") == 1e-6);
  const ProblemSpec ft = testsupport::problem("free_time");
  CHECK(ft.freeTime);
  CHECK(ft.timeBracket->lo == 0.5);
}

TEST_CASE("malformed specs name the field") {
  json doc = testsupport::scalar_doc();
  doc.erase("delays");
  CHECK(field_of(doc) == "delays");
  doc = testsupport::scalar_doc();
  doc["n"] = "two";
  CHECK(field_of(doc) == "n");
  doc = testsupport::scalar_doc();
  doc["x0"] = {1, 2};
  CHECK(field_of(doc) == "x0");
  doc = testsupport::scalar_doc();
  doc["dynamics"]["type"] = "chaotic";
  CHECK(field_of(doc) == "dynamics.type");
  doc = testsupport::scalar_doc();
  doc["control_set"] = {{"type", "box"}, {"lo", {2}}, {"hi", {1}}};
  CHECK(field_of(doc) == "control_set");
  doc = testsupport::scalar_doc();
  doc["delays"] = {0, 1, 0.5};
  CHECK(field_of(doc) == "delays");
  doc = testsupport::scalar_doc();
  doc["T"] = "sometimes";
  CHECK(field_of(doc) == "T");
  doc = testsupport::scalar_doc();
  doc["tolerances"] = {{"pointwiseResidual", "small"}};
  CHECK(field_of(doc) == "tolerances.pointwiseResidual");
  doc = testsupport::scalar_doc();
  doc["running_cost"] = {{"type", "quadratic"}, {"R", {{{1, 0}, {0, 1}}}}};
  CHECK(field_of(doc).rfind("running_cost", 0) == 0);
  CHECK_THROWS_AS(io::load_problem("/nonexistent/spec.json"), SpecError);
}

TEST_CASE("trajectory CSV round trip is exact") {
  const fs::path dir = scratch("csv");
  const Trajectory tr = Trajectory::sampled(0.0, 1.0, 37, 2, [](double t) {
    Vec v(2);
    v << std::exp(t) / 3.0, std::sin(t * 7.0);
    return v;
  }, Interp::Linear);
  io::write_trajectory_csv(dir / "x.csv", tr, "x");
  std::ifstream in(dir / "x.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,x1,x2");
  const Trajectory back = io::read_trajectory_csv(dir / "x.csv", Interp::Linear);
  CHECK(back.times() == tr.times());
  CHECK(back.values() == tr.values());
}

TEST_CASE("multiplier CSV keeps the components") {
  const ProblemSpec spec = testsupport::problem("lq_delay_mixed");
  const Process proc = make_process(spec, testsupport::constant_control(spec, 0.1), spec.initialData, spec.x0, 1e-2);
  const MultiplierSet m = costate_solve(spec, proc, 1.0, Vec::Constant(1, 0.5), 1e-2);
  const fs::path dir = scratch("mult");
  io::write_multipliers_csv(dir / "m.csv", m);
  const MultiplierSet back = io::read_multipliers_csv(dir / "m.csv", 1.0);
  REQUIRE(back.components.size() == m.components.size());
  CHECK(back.p.values() == m.p.values());
  for (std::size_t k = 0; k < m.components.size(); ++k) CHECK(back.components[k].times() == m.components[k].times());
}

TEST_CASE("process files round trip") {
  const ProblemSpec spec = testsupport::problem("linear_delay_2d");
  const Process proc = make_process(spec, testsupport::constant_control(spec, 0.25), spec.initialData, spec.x0, 1e-2);
  const fs::path dir = scratch("proc");
  io::write_process(dir, proc);
  const Process back = io::read_process(dir, spec);
  CHECK(back.x.values() == proc.x.values());
  CHECK(back.u.values() == proc.u.values());
  CHECK(back.cost == proc.cost);
  CHECK_THROWS_AS(io::read_process(dir, testsupport::problem("linear_delay")), InvalidArgument);
}

TEST_CASE("stacked spec document") {
  const json original = io::read_json(testsupport::problem_path("lq_delay_mixed"));
  const StackedProblem sp = reduce(io::parse_problem(original));
  const json doc = io::stacked_document(original, sp);
  CHECK(doc["stacked_of"] == original);
  CHECK(doc["dynamics"]["stack_count"] == 6);
  const ProblemSpec again = io::parse_problem(doc);
  CHECK(again.n == sp.stacked.n);
  CHECK(again.m == sp.stacked.m);
  CHECK(again.T == doctest::Approx(sp.baseStep));
}

TEST_CASE("audit JSON field names") {
  AuditReport r;
  r.pointwiseResidual = 0.5;
  r.perTimeWorst = {{0.1, 0.5}};
  const json j = io::to_json(r);
  for (const char* key : {"pointwiseResidual", "integralResidual", "adjointDefect", "transversalityResidual",
                          "nontrivialityMargin", "freeTimeResidual", "perTimeWorst", "approximateMax"})
    CHECK(j.contains(key));
  CHECK(j["freeTimeResidual"].is_null());
  CHECK(j["perTimeWorst"][0]["t"] == 0.1);
}
