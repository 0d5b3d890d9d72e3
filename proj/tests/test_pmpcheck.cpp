#include <cmath>

#include "delaypmp/costate.hpp"
#include "delaypmp/ddesim.hpp"
#include "delaypmp/errors.hpp"
#include "delaypmp/pmpcheck.hpp"
#include "delaypmp/solver.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace delaypmp;
using testsupport::constant_control;
using testsupport::scalar_doc;
using testsupport::spec_of;

namespace {

MultiplierSet constant_p(const ProblemSpec& spec, double lambda, double p) {
  MultiplierSet m;
  m.lambda = lambda;
  m.p = Trajectory::constant(spec.S, spec.T, Vec::Constant(spec.n, p), Interp::Linear);
  m.components.push_back(m.p);
  for (int k = 1; k < spec.delays.count(); ++k)
    m.components.push_back(
        Trajectory::constant(spec.S - spec.delays[k], spec.T, Vec::Zero(spec.n), Interp::Linear));
  return m;
}

Process process_of(const ProblemSpec& spec, const Trajectory& u, double step = 1e-2) {
  return make_process(spec, u, spec.initialData, spec.x0, step);
}

// x' = u without delays, zero costs except g = c x(T); p = -c.
nlohmann::json integrator_doc(double c, bool finite) {
  auto doc = scalar_doc();
  doc["T"] = 1;
  doc["delays"] = {0};
  doc["dynamics"] = {{"type", "linear_delay"}, {"A", {0}}, {"B", {1}}};
  doc["endpoint_cost"] = {{"type", "quadratic"}, {"cT", {c}}};
  if (finite) doc["control_set"] = {{"type", "finite"}, {"points", {{-1}, {1}}}};
  doc["initial_data"] = {{"dx", {0}}, {"du", {0}}};
  return doc;
}

Trajectory two_piece(double a, double b, double split, double v0, double v1) {
  Mat v(1, 3);
  v << v0, v1, v1;
  return Trajectory({a, split, b}, v, Interp::PiecewiseConstantLeft);
}

}  // namespace

TEST_CASE("hamiltonian: zero data") {
  const ProblemSpec spec = spec_of(scalar_doc());
  const Process proc = process_of(spec, constant_control(spec, 0.2));
  const MultiplierSet m = constant_p(spec, 1.0, 3.0);
  for (double t : {0.0, 0.7, 1.5, 2.0}) CHECK(hamiltonian(spec, proc, m, t, Vec::Constant(1, 0.9), Vec()) == 0.0);
}

TEST_CASE("hamiltonian: delay-free reduction") {
  auto doc = integrator_doc(0.0, false);
  doc["running_cost"] = {{"type", "quadratic"}, {"R", {3.0}}};
  const ProblemSpec spec = spec_of(doc);
  const Process proc = process_of(spec, constant_control(spec, 0.1));
  const MultiplierSet m = constant_p(spec, 2.0, 0.5);
  // p u - lambda 1.5 u^2
  CHECK(hamiltonian(spec, proc, m, 0.3, Vec::Constant(1, 0.4), Vec()) == doctest::Approx(0.5 * 0.4 - 2.0 * 1.5 * 0.16));
}

TEST_CASE("hamiltonian: two active control slots") {
  auto doc = scalar_doc();
  doc["dynamics"] = {{"type", "linear_delay"}, {"A", {0}}, {"B", {1, 1}}};
  const ProblemSpec spec = spec_of(doc);
  const Process proc = process_of(spec, constant_control(spec, 0.0));
  const MultiplierSet m = constant_p(spec, 0.0, 1.0);
  // Only differences in u matter; the slot-k terms contribute u each.
  const double h0 = hamiltonian(spec, proc, m, 0.5, Vec::Constant(1, 0.0), Vec());
  for (double u : {-1.0, 0.3, 0.8}) CHECK(hamiltonian(spec, proc, m, 0.5, Vec::Constant(1, u), Vec()) - h0 == doctest::Approx(2.0 * u));
  // t + 1 > T: a single slot is active.
  const double h1 = hamiltonian(spec, proc, m, 1.5, Vec::Constant(1, 0.0), Vec());
  CHECK(hamiltonian(spec, proc, m, 1.5, Vec::Constant(1, 0.5), Vec()) - h1 == doctest::Approx(0.5));
}

TEST_CASE("pointwise residual: finite set and sign rule") {
  const ProblemSpec spec = spec_of(integrator_doc(-1.0, true));
  const MultiplierSet m = constant_p(spec, 1.0, 1.0);
  const std::vector<double> grid = uniform_grid(0.0, 1.0, 20);
  const Process good = process_of(spec, constant_control(spec, 1.0));
  const PointwiseResult a = pointwise_max_residual(spec, good, m, grid);
  CHECK(a.residual == 0.0);
  CHECK_FALSE(a.approximate);
  const Process bad = process_of(spec, two_piece(0.0, 1.0, 0.5, -1.0, 1.0));
  const PointwiseResult b = pointwise_max_residual(spec, bad, m, grid);
  CHECK(b.residual == doctest::Approx(2.0));
  for (const auto& [t, gap] : b.perTime) CHECK(gap == doctest::Approx(t < 0.5 ? 2.0 : 0.0));
}

TEST_CASE("pointwise residual: quadratic running cost on a box") {
  auto doc = integrator_doc(0.0, false);
  doc["dynamics"] = {{"type", "linear_delay"}, {"A", {0}}, {"B", {0}}};
  doc["running_cost"] = {{"type", "quadratic"}, {"R", {2.0}}};
  const ProblemSpec spec = spec_of(doc);
  const MultiplierSet m = constant_p(spec, 1.0, 0.0);
  const Process half = process_of(spec, constant_control(spec, 0.5));
  const PointwiseResult r = pointwise_max_residual(spec, half, m, uniform_grid(0.0, 1.0, 10));
  CHECK(r.residual == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(r.approximate);
}

TEST_CASE("integral residual: reference and gap certificate") {
  const ProblemSpec spec = spec_of(integrator_doc(-1.0, true));
  const MultiplierSet m = constant_p(spec, 1.0, 1.0);
  const Process proc = process_of(spec, constant_control(spec, 1.0));
  CHECK(integral_weierstrass_residual(spec, proc, m, proc.u, proc.d) == 0.0);
  // u = -1 on [0.5, 0.6) loses the gap 2 on a set of measure 0.1.
  Mat v(1, 4);
  v << 1.0, -1.0, 1.0, 1.0;
  const Trajectory cand({0.0, 0.5, 0.6, 1.0}, v, Interp::PiecewiseConstantLeft);
  CHECK(integral_weierstrass_residual(spec, proc, m, cand, proc.d) <= -0.2 + 1e-9);
}

TEST_CASE("integral residual is dominated by the pointwise check without control delays") {
  const ProblemSpec spec = spec_of(integrator_doc(-1.0, true));
  const Process proc = process_of(spec, constant_control(spec, 1.0));
  const MultiplierSet m = costate_solve(spec, proc, 1.0, Vec::Constant(1, 1.0), 1e-2);
  const AuditReport r = full_audit(spec, proc, m);
  CHECK(r.pointwiseResidual == 0.0);
  CHECK(r.integralResidual <= 1e-12);
}

TEST_CASE("audit of the delay-free Riccati solution") {
  // x' = u, L = u^2 / 2, g = x(T)^2 / 2: u = -x0 / (1 + T), p = -x(T).
  auto doc = integrator_doc(0.0, false);
  doc["control_set"] = {{"type", "box"}, {"lo", {-5}}, {"hi", {5}}};
  doc["running_cost"] = {{"type", "quadratic"}, {"R", {1.0}}};
  doc["endpoint_cost"] = {{"type", "quadratic"}, {"QT", {{1.0}}}};
  const ProblemSpec spec = spec_of(doc);
  const Process proc = process_of(spec, constant_control(spec, -0.5), 1e-3);
  CHECK(proc.cost == doctest::Approx(0.25));
  const MultiplierSet m = normal_costate(spec, proc, 1e-3);
  CHECK(m.p(0.0)(0) == doctest::Approx(-0.5));
  const AuditReport r = full_audit(spec, proc, m);
  CHECK(r.pointwiseResidual <= 1e-5);
  CHECK(r.integralResidual <= 1e-5);
  CHECK(r.adjointDefect <= 1e-5);
  CHECK(r.transversalityResidual <= 1e-5);
  CHECK(audit_passes(r, {}));
}

TEST_CASE("trivial multiplier fails the audit") {
  const ProblemSpec spec = testsupport::problem("linear_delay");
  const Process proc = process_of(spec, constant_control(spec, 0.0));
  const AuditReport r = full_audit(spec, proc, constant_p(spec, 0.0, 0.0));
  CHECK(r.nontrivialityMargin == 0.0);
  CHECK_FALSE(audit_passes(r, {}));
}

TEST_CASE("audit is deterministic and serial equals parallel") {
  for (const char* name : {"linear_delay_2d", "lq_delay_mixed", "bang_bang_delay"}) {
    const ProblemSpec spec = testsupport::problem(name);
    const Process proc = process_of(spec, constant_control(spec, spec.U.sets()[0].kind() == ControlSet::Kind::Finite ? 1.0 : 0.2));
    const MultiplierSet m = normal_costate(spec, proc, 1e-2);
    AuditOptions serial, parallel;
    serial.exec = Exec::Serial;
    serial.seed = parallel.seed = 42;
    const AuditReport a = full_audit(spec, proc, m, serial);
    const AuditReport b = full_audit(spec, proc, m, parallel);
    const AuditReport c = full_audit(spec, proc, m, parallel);
    CAPTURE(name);
    CHECK(a.pointwiseResidual == b.pointwiseResidual);
    CHECK(a.integralResidual == b.integralResidual);
    CHECK(a.perTimeWorst == b.perTimeWorst);
    CHECK(b.pointwiseResidual == c.pointwiseResidual);
    CHECK(b.integralResidual == c.integralResidual);
  }
}

TEST_CASE("residuals scale with the multiplier") {
  const ProblemSpec spec = testsupport::problem("lq_delay_mixed");
  const Process proc = process_of(spec, constant_control(spec, 0.4));
  const MultiplierSet m = normal_costate(spec, proc, 1e-2);
  MultiplierSet s = m;
  const double alpha = 2.5;
  s.lambda *= alpha;
  s.p = Trajectory(m.p.times(), alpha * m.p.values(), Interp::Linear);
  for (auto& c : s.components) c = Trajectory(c.times(), alpha * c.values(), Interp::Linear);
  const AuditReport a = full_audit(spec, proc, m);
  const AuditReport b = full_audit(spec, proc, s);
  CHECK(b.pointwiseResidual == doctest::Approx(alpha * a.pointwiseResidual).epsilon(1e-6));
  CHECK(b.adjointDefect == doctest::Approx(alpha * a.adjointDefect).epsilon(1e-9));
  CHECK(b.transversalityResidual == doctest::Approx(alpha * a.transversalityResidual).epsilon(1e-9));
}

TEST_CASE("candidate battery") {
  const ProblemSpec spec = testsupport::problem("linear_delay_2d");
  const Process proc = process_of(spec, constant_control(spec, 0.0));
  const auto a = candidate_battery(spec, proc, 3);
  const auto b = candidate_battery(spec, proc, 3);
  const auto c = candidate_battery(spec, proc, 4);
  REQUIRE(a.size() == b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].u.values() == b[i].u.values());
    if (i < c.size() && a[i].u.values() != c[i].u.values()) differs = true;
    for (int j = 0; j < a[i].u.size(); ++j) CHECK(spec.U.at(a[i].u.time(j)).contains(a[i].u.sample(j)));
  }
  CHECK(differs);
}
