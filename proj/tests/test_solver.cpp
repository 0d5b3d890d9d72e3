#include <cmath>
#include <random>

#include "delaypmp/costate.hpp"
#include "delaypmp/ddesim.hpp"
#include "delaypmp/errors.hpp"
#include "delaypmp/solver.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace delaypmp;
using testsupport::constant_control;
using testsupport::scalar_doc;
using testsupport::spec_of;

namespace {

nlohmann::json integrator_doc(nlohmann::json B, double c) {
  auto doc = scalar_doc();
  doc["dynamics"] = {{"type", "linear_delay"}, {"A", {0}}, {"B", B}};
  doc["endpoint_cost"] = {{"type", "quadratic"}, {"cT", {c}}};
  doc["initial_data"] = {{"dx", {0}}, {"du", {0}}};
  return doc;
}

Process process_of(const ProblemSpec& spec, const Trajectory& u, double step = 1e-2) {
  return make_process(spec, u, spec.initialData, spec.x0, step);
}

}  // namespace

TEST_CASE("reduced gradient: running cost only") {
  auto doc = scalar_doc();
  doc["running_cost"] = {{"type", "quadratic"}, {"R", {1.0}}};
  const ProblemSpec spec = spec_of(doc);
  const Trajectory u = Trajectory::sampled(0.0, 2.0, 8, 1, [](double t) { return Vec(Vec::Constant(1, 0.5 * t - 0.4)); },
                                           Interp::PiecewiseConstantLeft);
  const Process proc = process_of(spec, u);
  const Trajectory g = reduced_gradient(spec, proc, normal_costate(spec, proc, 1e-2));
  for (double t = 0.0; t < 2.0; t += 0.1) CHECK(g(t)(0) == doctest::Approx(u(t)(0)));
}

TEST_CASE("reduced gradient: terminal cost through an integrator") {
  const ProblemSpec spec = spec_of(integrator_doc({1}, 0.7));
  const Process proc = process_of(spec, constant_control(spec, 0.1));
  const Trajectory g = reduced_gradient(spec, proc, normal_costate(spec, proc, 1e-2));
  for (double t = 0.0; t < 2.0; t += 0.1) CHECK(g(t)(0) == doctest::Approx(0.7));
}

TEST_CASE("reduced gradient: delayed control shifts the support") {
  const ProblemSpec spec = spec_of(integrator_doc({0, 1}, 0.7));
  const Process proc = process_of(spec, constant_control(spec, 0.1));
  const Trajectory g = reduced_gradient(spec, proc, normal_costate(spec, proc, 1e-2));
  for (double t = 0.05; t < 2.0; t += 0.1) CHECK(g(t)(0) == doctest::Approx(t < 1.0 ? 0.7 : 0.0));
  // Finite differences on a two-interval mesh.
  const std::vector<double> mesh = uniform_grid(0.0, 2.0, 2);
  const Mat G = control_gradient(spec, proc, normal_costate(spec, proc, 1e-2), mesh);
  CHECK(G(0, 0) == doctest::Approx(0.7));
  CHECK(G(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("initial-data gradient against finite differences") {
  auto doc = scalar_doc();
  doc["dynamics"] = {{"type", "linear_delay"}, {"A", {-1.0, 0.5}}, {"B", {1.0, 0.3}}};
  doc["running_cost"] = {{"type", "quadratic"}, {"Q", {1.0}}, {"R", {1.0}}};
  doc["initial_cost"] = {{"type", "quadratic"}, {"Wx", {{1.0}}}, {"Wu", {{2.0}}}};
  doc["data_set"] = {{"type", "box"}, {"lo", {-2, -2}}, {"hi", {2, 2}}};
  const ProblemSpec spec = spec_of(doc);
  const std::vector<double> dMesh = uniform_grid(-1.0, 0.0, 5);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Mat dx(1, 6), du(1, 6);
  for (int j = 0; j < 6; ++j) dx(0, j) = U(rng), du(0, j) = U(rng);
  const double step = 1e-3;
  const Trajectory u = constant_control(spec, 0.2);
  auto cost = [&](const Mat& a, const Mat& b) {
    const InitialData d{Trajectory(dMesh, a, Interp::PiecewiseConstantLeft), Trajectory(dMesh, b, Interp::PiecewiseConstantLeft)};
    return make_process(spec, u, d, spec.x0, step).cost;
  };
  const InitialData d{Trajectory(dMesh, dx, Interp::PiecewiseConstantLeft), Trajectory(dMesh, du, Interp::PiecewiseConstantLeft)};
  const Process proc = make_process(spec, u, d, spec.x0, step);
  const Mat G = initial_data_gradient(spec, proc, normal_costate(spec, proc, step), dMesh);
  REQUIRE(G.rows() == 2);
  REQUIRE(G.cols() == 5);
  const double e = 1e-5;
  for (int j = 0; j < 5; ++j) {
    Mat a = dx, b = dx;
    a(0, j) += e;
    b(0, j) -= e;
    CHECK(G(0, j) == doctest::Approx((cost(a, du) - cost(b, du)) / (2 * e)).epsilon(1e-4));
    a = du, b = du;
    a(0, j) += e;
    b(0, j) -= e;
    CHECK(G(1, j) == doctest::Approx((cost(dx, a) - cost(dx, b)) / (2 * e)).epsilon(1e-4));
  }
}

TEST_CASE("solve: free endpoint, pure control cost") {
  auto doc = integrator_doc({1}, 0.0);
  doc["running_cost"] = {{"type", "quadratic"}, {"R", {2.0}}};
  doc["constraint"] = {{"type", "free"}};
  doc["control"] = {0.8};
  const ProblemSpec spec = spec_of(doc);
  SolveOptions opt;
  opt.controlIntervals = 10;
  const SolveResult r = solve(spec, opt);
  CHECK(r.converged);
  CHECK(r.process.cost == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.process.u.values().cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("solve: LQ with a state delay matches the closed form") {
  const ProblemSpec spec = testsupport::problem("linear_delay");
  SolveOptions opt;
  opt.controlIntervals = 200;
  opt.step = 1e-3;
  const SolveResult r = solve(spec, opt);
  CHECK(std::abs(r.process.cost - 11.0 / 6.0) <= 1e-4);
  // u = p with p = t - 2 on [0, 1] and -1 after.
  for (double t = 0.0; t < 2.0; t += 0.1) CHECK(std::abs(r.process.u(t)(0) - (t <= 1.0 ? t - 2.0 : -1.0)) <= 1e-2);
  REQUIRE(r.audit);
  CHECK(r.audit->pointwiseResidual <= 1e-4);
  CHECK(audit_passes(*r.audit, spec.tolerances));
}

TEST_CASE("solve: finite control set equals enumeration") {
  const ProblemSpec spec = testsupport::problem("bang_bang_delay");
  const int M = 8;
  SolveOptions opt;
  opt.controlIntervals = M;
  opt.audit = false;
  const SolveResult r = solve(spec, opt);
  const double step = effective_step(spec.T - spec.S, M, opt.step);
  const auto mesh = uniform_grid(spec.S, spec.T, M);
  double best = 1e300;
  for (unsigned pat = 0; pat < (1u << M); ++pat) {
    Mat v(1, M + 1);
    for (int j = 0; j < M; ++j) v(0, j) = (pat >> j) & 1u ? 1.0 : -1.0;
    v(0, M) = v(0, M - 1);
    best = std::min(best, make_process(spec, Trajectory(mesh, v, Interp::PiecewiseConstantLeft), spec.initialData, spec.x0, step).cost);
  }
  CHECK(r.process.cost == best);
  for (int j = 0; j < r.process.u.size(); ++j) CHECK(std::abs(r.process.u.sample(j)(0)) == 1.0);
}

TEST_CASE("solve: initial-data optimization lowers the cost") {
  auto doc = scalar_doc();
  doc["dynamics"] = {{"type", "linear_delay"}, {"A", {-1.0, 0.8}}, {"B", {1.0}}};
  doc["running_cost"] = {{"type", "quadratic"}, {"Q", {1.0}}, {"R", {1.0}}};
  doc["initial_cost"] = {{"type", "quadratic"}, {"Wx", {{0.5}}}};
  doc["control_set"] = {{"type", "box"}, {"lo", {-3}}, {"hi", {3}}};
  doc["data_set"] = {{"type", "box"}, {"lo", {-1, 0}}, {"hi", {1, 0}}};
  const ProblemSpec free = spec_of(doc);
  doc.erase("data_set");
  const ProblemSpec fixed = spec_of(doc);
  SolveOptions opt;
  opt.controlIntervals = 20;
  opt.step = 1e-2;
  const SolveResult a = solve(fixed, opt);
  const SolveResult b = solve(free, opt);
  CHECK(b.process.cost < a.process.cost);
  REQUIRE(b.audit);
  CHECK(b.audit->pointwiseResidual <= 5e-2);
  // The optimal history sits strictly inside the box.
  CHECK(b.process.d.dx.values().cwiseAbs().maxCoeff() < 1.0);
}

TEST_CASE("solve: unsupported constraints") {
  auto doc = testsupport::scalar_doc();
  doc["constraint"] = {{"type", "fixed_both"}, {"xT", {1}}};
  CHECK_THROWS_AS(solve(spec_of(doc), SolveOptions{}), Unsupported);
}

TEST_CASE("projected driver descends monotonically") {
  Mat Q(3, 3);
  Q << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  Vec b(3);
  b << 1, -2, 3;
  std::vector<double> accepted;
  auto objective = [&](const Vec& th, bool grad) {
    Evaluation ev;
    ev.cost = 0.5 * th.dot(Q * th) - b.dot(th);
    if (grad) {
      ev.gradient = Q * th - b;
      accepted.push_back(ev.cost);
    }
    return ev;
  };
  auto project = [](const Vec& th) { return Vec(th.cwiseMax(-0.5).cwiseMin(0.5)); };
  SolveOptions opt;
  opt.gradTol = 1e-12;
  const DriverResult r = minimize_projected(objective, project, Vec::Ones(3), Vec::Zero(3), opt);
  CHECK(r.converged);
  for (std::size_t i = 1; i < accepted.size(); ++i) CHECK(accepted[i] <= accepted[i - 1]);
  // KKT: components at the bounds have gradients pointing outward.
  const Vec g = Q * r.theta - b;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(r.theta(i)) < 0.5 - 1e-9) CHECK(std::abs(g(i)) <= 1e-8);
    else CHECK(g(i) * r.theta(i) <= 1e-12);
  }
}

TEST_CASE("parameterization round trip") {
  ControlParameterization p;
  p.n = 2;
  p.m = 1;
  p.uMesh = uniform_grid(0.0, 1.0, 4);
  p.dMesh = uniform_grid(-0.5, 0.0, 2);
  p.freeInitialState = true;
  CHECK(p.size() == 4 + 3 * 2 + 2);
  Vec theta = Vec::LinSpaced(p.size(), 1.0, static_cast<double>(p.size()));
  InitialData fallback;
  const Trajectory u = p.control(theta);
  const InitialData d = p.data(theta, fallback);
  const Vec x0 = p.initialState(theta, Vec::Zero(2));
  CHECK(p.pack(u, d, x0) == theta);
  CHECK(p.weights()(0) == doctest::Approx(0.25));
  CHECK(p.weights()(p.size() - 1) == 1.0);
}

TEST_CASE("free time: quadratic in T") {
  auto doc = scalar_doc();
  doc["T"] = "free";
  doc["T_bracket"] = {1.5, 3.0};
  doc["endpoint_cost"] = {{"type", "quadratic"}, {"time_weight", 2.0}, {"time_target", 2.2}};
  const ProblemSpec spec = spec_of(doc);
  SolveOptions opt;
  opt.controlIntervals = 4;
  opt.step = 1e-2;
  opt.timeSearch.tol = 1e-4;
  const SolveResult r = solve(spec, opt);
  CHECK(std::abs(r.process.T - 2.2) <= 1e-4);
  CHECK_FALSE(r.probes.empty());
}

TEST_CASE("free time: x' = u, g = -x(T) + T^2 / 2") {
  const ProblemSpec spec = testsupport::problem("free_time");
  SolveOptions opt;
  opt.controlIntervals = 20;
  opt.step = 1e-3;
  opt.timeSearch.tol = 1e-4;
  const SolveResult r = solve(spec, opt);
  CHECK(std::abs(r.process.T - 1.0) <= 1e-3);
  CHECK(r.process.cost == doctest::Approx(-0.5).epsilon(1e-6));
  REQUIRE(r.audit);
  REQUIRE(r.audit->twoSidedResidual);
  const double at = *r.audit->twoSidedResidual;
  // Stationarity: neighbours 10 tolerances away have a larger residual.
  for (double dT : {-1e-3, 1e-3}) {
    ProblemSpec fixed = spec;
    fixed.freeTime = false;
    fixed.T = r.process.T + dT;
    const SolveResult n = solve(fixed, opt);
    ProblemSpec probe = spec;
    probe.T = fixed.T;
    const double window = std::min(0.05 * fixed.T, 0.5 * fixed.T);
    CHECK(at <= transversality_free(probe, n.process, n.multipliers, window).twoSidedResidual);
  }
}

TEST_CASE("free time: golden section agrees with a fine sweep") {
  const ProblemSpec spec = testsupport::problem("lq_delay_free_time");
  SolveOptions opt;
  opt.controlIntervals = 20;
  opt.step = 1e-2;
  opt.audit = false;
  opt.timeSearch.tol = 1e-2;
  const SolveResult r = solve(spec, opt);
  double bestT = 0.0, best = 1e300;
  for (int i = -50; i <= 50; ++i) {
    ProblemSpec fixed = spec;
    fixed.freeTime = false;
    fixed.T = r.process.T + i * opt.timeSearch.tol / 10.0;
    const double c = solve(fixed, opt).process.cost;
    if (c < best) best = c, bestT = fixed.T;
  }
  CHECK(std::abs(bestT - r.process.T) <= 2.0 * opt.timeSearch.tol);
  CHECK(r.process.cost <= best + 1e-9);
}

TEST_CASE("free time: bracket must clear the delay") {
  ProblemSpec spec = testsupport::problem("lq_delay_free_time");
  SolveOptions opt;
  opt.timeSearch.bracket = Interval{0.3, 2.0};
  CHECK_THROWS_AS(solve(spec, opt), InvalidArgument);
}
