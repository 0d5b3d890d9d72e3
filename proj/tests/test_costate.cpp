#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "delaypmp/costate.hpp"
#include "delaypmp/ddesim.hpp"
#include "delaypmp/errors.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace delaypmp;
using testsupport::constant_control;
using testsupport::scalar_doc;
using testsupport::spec_of;

namespace {

Process process_of(const ProblemSpec& spec, double u, double step = 1e-3) {
  return make_process(spec, constant_control(spec, u), spec.initialData, spec.x0, step);
}

MultiplierSet constant_multiplier(double lambda, double S, double T, const Vec& p) {
  MultiplierSet m;
  m.lambda = lambda;
  m.p = Trajectory::constant(S, T, p, Interp::Linear);
  m.components = {m.p};
  return m;
}

}  // namespace

TEST_CASE("zero dynamics: p constant, delayed components vanish") {
  const ProblemSpec spec = spec_of(scalar_doc());
  const MultiplierSet m = costate_solve(spec, process_of(spec, 0.0), 1.0, Vec::Constant(1, 1.0), 1e-2);
  CHECK((m.p.values().array() - 1.0).abs().maxCoeff() <= 1e-15);
  REQUIRE(m.components.size() == 2);
  CHECK(m.components[1].values().cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.components[1].start() == doctest::Approx(-1.0));
}

TEST_CASE("x' = x(t - 1): piecewise polynomial costate and its components") {
  const ProblemSpec spec = testsupport::problem("linear_delay");
  const MultiplierSet m = costate_solve(spec, process_of(spec, 0.0), 1.0, Vec::Constant(1, -1.0), 1e-3);
  for (double t = 0.0; t <= 2.0; t += 0.05) {
    const double want = t <= 1.0 ? t - 2.0 : -1.0;
    CHECK(std::abs(m.p(t)(0) - want) <= 1e-6);
  }
  CHECK(std::abs(m.p(0.0)(0) + 2.0) <= 1e-6);
  const Trajectory& p1 = m.components[1];
  // p_1(t - 1) solves -p_1' = p(t) on [1, 2]; it is zero on [1, 2] and constant before 0.
  CHECK(p1(1.5)(0) == 0.0);
  CHECK(std::abs(p1(0.0)(0) + 1.0) <= 1e-9);
  CHECK(std::abs(p1(-0.5)(0) - p1(0.0)(0)) <= 1e-12);
  for (int i = 0; i < m.p.size(); ++i) {
    const double t = m.p.time(i);
    Vec sum = Vec::Zero(1);
    for (const auto& c : m.components) sum += c(t);
    CHECK(std::abs(sum(0) - m.p.sample(i)(0)) <= 1e-9 * (1.0 + m.supP()));
  }
}

TEST_CASE("delay-free costate matches the matrix exponential") {
  auto doc = scalar_doc();
  doc["delays"] = {0};
  doc["n"] = 2;
  doc["x0"] = {1, 0};
  doc["dynamics"] = {{"type", "linear_delay"}, {"A", {{{0.1, 1.0}, {-2.0, -0.3}}}}, {"B", {{{0}, {1}}}}};
  doc["initial_data"] = {{"dx", {0, 0}}, {"du", {0}}};
  const ProblemSpec spec = spec_of(doc);
  Mat A(2, 2);
  A << 0.1, 1.0, -2.0, -0.3;
  Vec pT(2);
  pT << 0.5, -1.0;
  const MultiplierSet m = costate_solve(spec, process_of(spec, 0.2), 1.0, pT, 1e-3);
  for (double t = 0.0; t <= 2.0; t += 0.125) {
    const Mat E = (A.transpose() * (spec.T - t)).exp();
    CHECK((m.p(t) - E * pT).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("support conditions on the catalog") {
  for (const char* name : {"lq_delay_mixed", "noncommensurate", "linear_delay_2d"}) {
    const ProblemSpec spec = testsupport::problem(name);
    const Process proc = process_of(spec, 0.3, 5e-3);
    Vec pT = Vec::LinSpaced(spec.n, -1.0, 0.5);
    const MultiplierSet m = costate_solve(spec, proc, 1.0, pT, 5e-3);
    CAPTURE(name);
    for (int k = 1; k < spec.delays.count(); ++k) {
      const Trajectory& c = m.components[static_cast<std::size_t>(k)];
      const double hk = spec.delays[k];
      CHECK(c.start() == doctest::Approx(spec.S - hk));
      for (int i = 0; i < c.size(); ++i) {
        if (c.time(i) >= std::max(spec.T - hk, spec.S)) CHECK(c.sample(i).cwiseAbs().maxCoeff() == 0.0);
        if (c.time(i) <= spec.S) CHECK((c.sample(i) - c(spec.S)).cwiseAbs().maxCoeff() <= 1e-12);
      }
    }
    CHECK(adjoint_defect(spec, proc, m) <= 1e-4);
  }
}

TEST_CASE("transversality examples") {
  auto doc = scalar_doc();
  doc["endpoint_cost"] = {{"type", "quadratic"}, {"cT", {0.7}}};
  ProblemSpec spec = spec_of(doc);
  const Process proc = process_of(spec, 0.0, 1e-2);
  // Fixed initial state: p(S) is arbitrary.
  CHECK(transversality_fixed(spec, proc, constant_multiplier(1.0, 0.0, 2.0, Vec::Constant(1, -0.7))) ==
        doctest::Approx(0.0));
  Mat pv(1, 2);
  pv << 5.0, -0.7;
  MultiplierSet m;
  m.p = Trajectory({0.0, 2.0}, pv, Interp::Linear);
  CHECK(transversality_fixed(spec, proc, m) == doctest::Approx(0.0));

  doc = scalar_doc();
  doc["constraint"] = {{"type", "free"}};
  spec = spec_of(doc);
  CHECK(transversality_fixed(spec, proc, constant_multiplier(1.0, 0.0, 2.0, Vec::Zero(1))) == 0.0);

  doc["endpoint_cost"] = {{"type", "quadratic"}, {"QS", {{2.0}}}, {"QT", {{2.0}}}};
  spec = spec_of(doc);
  Process two = proc;
  Mat xv(1, 2);
  xv << 1.0, 2.0;
  two.x = Trajectory({0.0, 2.0}, xv, Interp::Linear);
  pv << 2.0, -4.0;
  m.p = Trajectory({0.0, 2.0}, pv, Interp::Linear);
  CHECK(transversality_fixed(spec, two, m) == doctest::Approx(0.0));
  pv << 2.0, -3.0;
  m.p = Trajectory({0.0, 2.0}, pv, Interp::Linear);
  CHECK(transversality_fixed(spec, two, m) == doctest::Approx(1.0));
}

TEST_CASE("essential values") {
  std::vector<double> ts, smooth, step, osc;
  const double c = 0.5;
  for (int i = 0; i <= 20000; ++i) {
    const double t = i / 20000.0;
    ts.push_back(t);
    smooth.push_back(std::cos(3.0 * t));
    step.push_back(t < c ? 0.0 : 1.0);
    osc.push_back(t == c ? 0.0 : (std::sin(1.0 / (t - c)) >= 0.0 ? 1.0 : -1.0));
  }
  const std::vector<double> ladder{0.1, 0.05, 0.025, 0.0125};
  const Interval a = essential_value(ts, smooth, c, ladder);
  CHECK(a.lo == doctest::Approx(std::cos(1.5)).epsilon(0.05));
  CHECK(a.hi == doctest::Approx(std::cos(1.5)).epsilon(0.05));
  const Interval b = essential_value(ts, step, c, ladder);
  CHECK(b.lo == 0.0);
  CHECK(b.hi == 1.0);
  const Interval o = essential_value(ts, osc, c, ladder);
  CHECK(o.lo == -1.0);
  CHECK(o.hi == 1.0);

  CHECK_THROWS_AS(essential_value(ts, smooth, c, std::vector<double>{}), InvalidArgument);
  CHECK_THROWS_AS(essential_value(ts, smooth, 0.95, ladder), DomainError);
}

TEST_CASE("essential value ladder is nested on random data") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const std::vector<double> ladder{0.2, 0.1, 0.05, 0.025, 0.0125};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> ts, vs;
    for (int i = 0; i <= 1000; ++i) {
      ts.push_back(i / 1000.0);
      vs.push_back(U(rng));
    }
    const auto rungs = essential_value_ladder(ts, vs, 0.5, ladder);
    for (std::size_t k = 1; k < rungs.size(); ++k) {
      CHECK(rungs[k].lo >= rungs[k - 1].lo);
      CHECK(rungs[k].hi <= rungs[k - 1].hi);
    }
  }
}

TEST_CASE("free end-time checks") {
  auto doc = scalar_doc();
  doc["T"] = "free";
  doc["T_bracket"] = {0.5, 2.0};
  doc["delays"] = {0};
  doc["initial_data"] = {{"dx", {0}}, {"du", {0}}};
  ProblemSpec spec = spec_of(doc);
  spec.T = 1.0;
  const Process proc = process_of(spec, 0.0, 1e-2);
  const FreeTimeCheck zero = transversality_free(spec, proc, constant_multiplier(1.0, 0.0, 1.0, Vec::Zero(1)), 0.05);
  CHECK(zero.xiInterval.lo == 0.0);
  CHECK(zero.xiInterval.hi == 0.0);
  CHECK(zero.twoSidedResidual == 0.0);

  doc["endpoint_cost"] = {{"type", "quadratic"}, {"time_linear", 0.3}};
  ProblemSpec tilted = spec_of(doc);
  tilted.T = 1.0;
  const FreeTimeCheck t = transversality_free(tilted, proc, constant_multiplier(1.0, 0.0, 1.0, Vec::Zero(1)), 0.05);
  CHECK(t.twoSidedResidual == doctest::Approx(0.3));

  // x' = u on [-1, 1] with p(T) = 1: max p u = 1 = dg/dT when g = -x(T) + T^2/2 at T = 1.
  doc["dynamics"] = {{"type", "linear_delay"}, {"A", {0}}, {"B", {1}}};
  doc["endpoint_cost"] = {{"type", "quadratic"}, {"cT", {-1}}, {"time_weight", 1.0}};
  ProblemSpec ft = spec_of(doc);
  ft.T = 1.0;
  const FreeTimeCheck e = transversality_free(ft, process_of(ft, 1.0, 1e-2), constant_multiplier(1.0, 0.0, 1.0, Vec::Ones(1)), 0.05);
  CHECK(e.twoSidedResidual == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(e.residual == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(transversality_free(ft, process_of(ft, 1.0, 1e-2), constant_multiplier(1.0, 0.0, 1.0, Vec::Ones(1)), 2.0),
                  InvalidArgument);
}

TEST_CASE("free end time rejects control delays") {
  auto doc = scalar_doc();
  doc["T"] = "free";
  doc["T_bracket"] = {1.5, 3.0};
  doc["dynamics"] = {{"type", "linear_delay"}, {"A", {0}}, {"B", {0, 1}}};
  CHECK_THROWS_AS(spec_of(doc), SpecError);
}

TEST_CASE("normalize") {
  MultiplierSet a = constant_multiplier(2.0, 0.0, 1.0, Vec::Zero(1));
  CHECK(normalize(a).lambda == doctest::Approx(1.0));
  MultiplierSet b = constant_multiplier(0.0, 0.0, 1.0, Vec::Constant(1, 4.0));
  b.xi = 2.0;
  const MultiplierSet nb = normalize(b);
  CHECK(nb.lambda == 0.0);
  CHECK(nb.supP() == doctest::Approx(1.0));
  CHECK(*nb.xi == doctest::Approx(0.5));
  MultiplierSet c = constant_multiplier(1.0, 0.0, 1.0, Vec::Constant(1, -1.0));
  const MultiplierSet nc = normalize(c);
  CHECK(nc.lambda == doctest::Approx(0.5));
  CHECK(nc.supP() == doctest::Approx(0.5));
  CHECK_THROWS_AS(normalize(constant_multiplier(0.0, 0.0, 1.0, Vec::Zero(1))), NumericalError);
}
