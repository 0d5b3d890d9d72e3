#include "delaypmp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "delaypmp/ddesim.hpp"
#include "delaypmp/errors.hpp"
#include "detail.hpp"

namespace delaypmp {

// ---------------------------------------------------------------- parameters

Trajectory ControlParameterization::control(const Vec& theta) const {
  const int M = uCount();
  Mat vals(m, M + 1);
  for (int j = 0; j < M; ++j) vals.col(j) = theta.segment(j * m, m);
  vals.col(M) = vals.col(M - 1);
  return Trajectory(uMesh, std::move(vals), Interp::PiecewiseConstantLeft);
}

InitialData ControlParameterization::data(const Vec& theta, const InitialData& fallback) const {
  if (dMesh.empty()) return fallback;
  const int Md = dCount();
  const int off = m * uCount();
  Mat dx(n, Md + 1), du(m, Md + 1);
  for (int j = 0; j < Md; ++j) {
    dx.col(j) = theta.segment(off + j * (n + m), n);
    du.col(j) = theta.segment(off + j * (n + m) + n, m);
  }
  dx.col(Md) = dx.col(Md - 1);
  du.col(Md) = du.col(Md - 1);
  return {Trajectory(dMesh, std::move(dx), Interp::PiecewiseConstantLeft),
          Trajectory(dMesh, std::move(du), Interp::PiecewiseConstantLeft)};
}

Vec ControlParameterization::initialState(const Vec& theta, const Vec& fallback) const {
  return freeInitialState ? Vec(theta.tail(n)) : fallback;
}

Vec ControlParameterization::pack(const Trajectory& u, const InitialData& d, const Vec& x0) const {
  Vec theta(size());
  for (int j = 0; j < uCount(); ++j) theta.segment(j * m, m) = u(uMesh[static_cast<std::size_t>(j)]);
  const int off = m * uCount();
  for (int j = 0; j < dCount(); ++j) {
    const double t = dMesh[static_cast<std::size_t>(j)];
    theta.segment(off + j * (n + m), n) = d.dx(t);
    theta.segment(off + j * (n + m) + n, m) = d.du(t);
  }
  if (freeInitialState) theta.tail(n) = x0;
  return theta;
}

Vec ControlParameterization::weights() const {
  Vec w = Vec::Ones(size());
  for (int j = 0; j < uCount(); ++j)
    w.segment(j * m, m).setConstant(uMesh[static_cast<std::size_t>(j) + 1] - uMesh[static_cast<std::size_t>(j)]);
  const int off = m * uCount();
  for (int j = 0; j < dCount(); ++j)
    w.segment(off + j * (n + m), n + m)
        .setConstant(dMesh[static_cast<std::size_t>(j) + 1] - dMesh[static_cast<std::size_t>(j)]);
  return w;
}

// -------------------------------------------------------------------- driver

DriverResult minimize_projected(const std::function<Evaluation(const Vec&, bool)>& objective,
                                const std::function<Vec(const Vec&)>& project, const Vec& weights, Vec theta,
                                const SolveOptions& options) {
  const StepRule& rule = options.stepRule;
  DriverResult res;
  theta = project(theta);
  Evaluation ev = objective(theta, true);
  if (!std::isfinite(ev.cost)) throw NumericalError("cost is not finite at the starting point");
  double alpha = rule.initial;
  Vec prevTheta, prevScaled;
  res.message = "iteration limit reached";

  for (int it = 0;; ++it) {
    const Vec scaled = ev.gradient.cwiseQuotient(weights);
    res.gradNorm = (theta - project(theta - scaled)).cwiseAbs().maxCoeff();
    if (res.gradNorm <= options.gradTol) {
      res.converged = true;
      res.message = "converged";
      break;
    }
    if (it >= options.maxOuterIter) break;
    if (it > 0) {
      const Vec s = theta - prevTheta, y = scaled - prevScaled;
      const double sy = (weights.array() * s.array() * y.array()).sum();
      const double ss = (weights.array() * s.array() * s.array()).sum();
      if (sy > 0.0 && std::isfinite(ss / sy)) alpha = std::clamp(ss / sy, 1e-10, 1e10);
    }
    bool accepted = false;
    Vec cand;
    for (int b = 0; b <= rule.maxBacktracks; ++b, alpha *= rule.shrink) {
      cand = project(theta - alpha * scaled);
      const Vec dir = cand - theta;
      const double slope = ev.gradient.dot(dir);
      if (dir.cwiseAbs().maxCoeff() == 0.0) break;
      const double Jc = objective(cand, false).cost;
      if (std::isfinite(Jc) && Jc <= ev.cost + rule.sufficientDecrease * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.message = "line search failed to decrease the cost";
      break;
    }
    prevTheta = theta;
    prevScaled = scaled;
    theta = cand;
    ev = objective(theta, true);
    ++res.iterations;
  }
  res.theta = theta;
  res.cost = ev.cost;
  return res;
}

// ----------------------------------------------------------------- gradients

namespace {

bool slot_active(double tau, Side side, double S, double T, int k) {
  if (k == 0) return true;
  if (side == Side::Left) return tau > S + detail::snap_tol(S) && tau <= T + detail::snap_tol(T);
  return tau >= S - detail::snap_tol(S) && tau < T - detail::snap_tol(T);
}

Vec control_integrand(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult, double t, Side side) {
  if (!spec.f.du) throw Unsupported("reduced gradient needs the control Jacobians of f");
  if (spec.L.value && !spec.L.du) throw Unsupported("reduced gradient needs the control gradients of L");
  Vec g = Vec::Zero(spec.m);
  for (int k = 0; k < spec.delays.count(); ++k) {
    const double tau = t + spec.delays[k];
    if (!slot_active(tau, side, spec.S, proc.T, k)) continue;
    const DelayedArgs args = delayed_args(spec.delays, proc.x, proc.u, proc.d, std::min(tau, proc.T), side);
    g -= spec.f.du(args, k).transpose() * mult.p(std::min(tau, proc.T), side);
    if (mult.lambda != 0.0 && spec.L.du) g += mult.lambda * spec.L.du(args, k);
  }
  detail::require_finite(g, "reduced gradient");
  return g;
}

Vec data_integrand(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult, double s, Side side) {
  const int n = spec.n, m = spec.m;
  Vec g = Vec::Zero(n + m);
  if (mult.lambda != 0.0 && spec.Lambda.value) {
    if (!spec.Lambda.gradient) throw Unsupported("initial-data gradient needs the gradient of Lambda");
    const auto [gx, gu] = spec.Lambda.gradient(s, proc.d.dx(s, side), proc.d.du(s, side));
    g.head(n) += mult.lambda * gx;
    g.tail(m) += mult.lambda * gu;
  }
  for (int k = 1; k < spec.delays.count(); ++k) {
    const double tau = s + spec.delays[k];
    if (!slot_active(tau, side, spec.S, proc.T, k)) continue;
    const DelayedArgs args = delayed_args(spec.delays, proc.x, proc.u, proc.d, tau, side);
    const Vec p = mult.p(tau, side);
    g.head(n) -= spec.f.dx(args, k).transpose() * p;
    g.tail(m) -= spec.f.du(args, k).transpose() * p;
    if (mult.lambda != 0.0 && spec.L.value) {
      g.head(n) += mult.lambda * spec.L.dx(args, k);
      g.tail(m) += mult.lambda * spec.L.du(args, k);
    }
  }
  detail::require_finite(g, "initial-data gradient");
  return g;
}

std::vector<double> shifted(const std::vector<double>& ts, double by) {
  std::vector<double> out(ts.size());
  std::transform(ts.begin(), ts.end(), out.begin(), [by](double t) { return t + by; });
  return out;
}

/// Trapezoid integral of fn over each mesh interval on the merged node set.
template <class Fn>
Mat integrate_on_mesh(const std::vector<double>& nodes, const std::vector<double>& mesh, int rows, Fn&& fn) {
  const int M = static_cast<int>(mesh.size()) - 1;
  Mat out = Mat::Zero(rows, M);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double a = nodes[i], b = nodes[i + 1];
    const double mid = 0.5 * (a + b);
    int j = static_cast<int>(std::upper_bound(mesh.begin(), mesh.end(), mid) - mesh.begin()) - 1;
    j = std::clamp(j, 0, M - 1);
    out.col(j) += 0.5 * (b - a) * (fn(a, Side::Point) + fn(b, Side::Left));
  }
  return out;
}

}  // namespace

Trajectory reduced_gradient(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult) {
  const auto nodes = quadrature_grid(spec, proc);
  Mat vals(spec.m, static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i)
    vals.col(static_cast<Eigen::Index>(i)) =
        control_integrand(spec, proc, mult, nodes[i], i + 1 == nodes.size() ? Side::Left : Side::Point);
  return Trajectory(nodes, std::move(vals), Interp::PiecewiseConstantLeft);
}

Mat control_gradient(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult,
                     const std::vector<double>& mesh) {
  const std::vector<std::vector<double>> lists{quadrature_grid(spec, proc), mesh};
  const auto nodes = merged_grid(lists, spec.S, proc.T);
  return integrate_on_mesh(nodes, mesh, spec.m,
                           [&](double t, Side side) { return control_integrand(spec, proc, mult, t, side); });
}

Mat initial_data_gradient(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult,
                          const std::vector<double>& mesh) {
  const double S = spec.S, h = spec.h();
  if (!(h > 0.0)) return Mat::Zero(spec.n + spec.m, std::max<int>(0, static_cast<int>(mesh.size()) - 1));
  std::vector<std::vector<double>> lists{mesh, proc.d.dx.times(), proc.d.du.times()};
  for (int k = 1; k < spec.delays.count(); ++k) {
    lists.push_back(shifted(proc.x.times(), -spec.delays[k]));
    lists.push_back(shifted(proc.u.times(), -spec.delays[k]));
    lists.push_back({proc.T - spec.delays[k]});
  }
  const auto nodes = merged_grid(lists, S - h, S);
  return integrate_on_mesh(nodes, mesh, spec.n + spec.m,
                           [&](double s, Side side) { return data_integrand(spec, proc, mult, s, side); });
}

MultiplierSet normal_costate(const ProblemSpec& spec, const Process& proc, double step) {
  if (!spec.g.gradient) throw Unsupported("solver needs the gradient of g");
  const EndpointGradient grad = spec.g.gradient(proc.x(spec.S), proc.x(proc.T), proc.T);
  return costate_solve(spec, proc, 1.0, -grad.xT, step);
}

double effective_step(double span, int intervals, double step) {
  if (intervals < 1) throw InvalidArgument("controlIntervals must be >= 1");
  if (!(step > 0.0)) throw InvalidArgument("step must be positive");
  const int per = std::max(1, static_cast<int>(std::ceil(span / (intervals * step) - 1e-9)));
  return span / (static_cast<double>(per) * intervals);
}

// -------------------------------------------------------------- fixed time

namespace {

enum class SetFamily { Continuous, Discrete };

SetFamily family_of(const SetSchedule& sched) {
  bool finite = false, box = false;
  for (const auto& s : sched.sets()) {
    if (s.kind() == ControlSet::Kind::Finite) finite = true;
    if (s.kind() == ControlSet::Kind::Box) box = true;
  }
  if (finite && box) throw Unsupported("schedules mixing finite and box sets are not supported by the solver");
  return finite ? SetFamily::Discrete : SetFamily::Continuous;
}

struct Setup {
  ControlParameterization param;
  double step = 0.0;
  Vec x0;
  InitialData d0;
  Trajectory u0;
  bool dataFree = false;
};

Setup make_setup(const ProblemSpec& spec, double T, const SolveOptions& options) {
  Setup s;
  const double S = spec.S, span = T - S, h = spec.h();
  if (!(span > 0.0)) throw InvalidArgument("solver needs T > S");
  const int M = options.controlIntervals;
  s.step = effective_step(span, M, options.step);
  s.param.n = spec.n;
  s.param.m = spec.m;
  s.param.uMesh = uniform_grid(S, T, M);
  s.dataFree = spec.D && !spec.D->allFixed() && h > 0.0;
  if (s.dataFree) {
    const int Md = options.dataIntervals > 0 ? options.dataIntervals
                                             : std::max(1, static_cast<int>(std::lround(M * h / span)));
    s.param.dMesh = uniform_grid(S - h, S, Md);
  }
  switch (spec.C.kind()) {
    case EndpointConstraint::Kind::Free:
      s.param.freeInitialState = true;
      s.x0 = spec.x0.size() == spec.n ? spec.x0 : Vec::Zero(spec.n);
      break;
    case EndpointConstraint::Kind::FixedInitial:
      s.x0 = spec.C.anchorS();
      break;
    default:
      throw Unsupported("solver supports free and fixed-initial endpoint constraints only");
  }
  const Vec uc = spec.initialControl.size() == spec.m ? spec.initialControl : Vec::Zero(spec.m);
  s.u0 = project_onto(spec.U, Trajectory(s.param.uMesh, uc.replicate(1, M + 1), Interp::PiecewiseConstantLeft));
  s.d0 = spec.initialData;
  return s;
}

ProblemSpec at_time(const ProblemSpec& spec, double T) {
  ProblemSpec out = spec;
  out.T = T;
  return out;
}

Vec project_theta(const ProblemSpec& spec, const ControlParameterization& param, const Vec& theta) {
  Vec out = theta;
  const int m = param.m, n = param.n;
  for (int j = 0; j < param.uCount(); ++j)
    out.segment(j * m, m) = spec.U.at(param.uMesh[static_cast<std::size_t>(j)]).project(theta.segment(j * m, m));
  const int off = m * param.uCount();
  for (int j = 0; j < param.dCount(); ++j)
    out.segment(off + j * (n + m), n + m) =
        spec.D->at(param.dMesh[static_cast<std::size_t>(j)]).project(theta.segment(off + j * (n + m), n + m));
  return out;
}

/// Integral of H(., v) over [a, b] on the nodes that fall inside.
double interval_score(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult,
                      const std::vector<double>& nodes, double a, double b, const Vec& v, bool data) {
  auto lo = std::lower_bound(nodes.begin(), nodes.end(), a - detail::snap_tol(a));
  double acc = 0.0;
  const Vec none;
  double prevT = a;
  double prevH = data ? hamiltonian(spec, proc, mult, a, none, v) : hamiltonian(spec, proc, mult, a, v, none);
  for (auto it = lo; it != nodes.end() && *it <= b + detail::snap_tol(b); ++it) {
    double t = *it;
    if (t <= prevT + detail::snap_tol(prevT)) continue;
    t = std::min(t, b);
    const double HL = data ? hamiltonian(spec, proc, mult, t, none, v, Side::Left)
                           : hamiltonian(spec, proc, mult, t, v, none, Side::Left);
    acc += 0.5 * (t - prevT) * (prevH + HL);
    prevT = t;
    if (t >= b) break;
    prevH = data ? hamiltonian(spec, proc, mult, t, none, v) : hamiltonian(spec, proc, mult, t, v, none);
  }
  if (b > prevT + detail::snap_tol(b)) {
    const double HL = data ? hamiltonian(spec, proc, mult, b, none, v, Side::Left)
                           : hamiltonian(spec, proc, mult, b, v, none, Side::Left);
    acc += 0.5 * (b - prevT) * (prevH + HL);
  }
  return acc;
}

struct Discrete {
  std::vector<std::vector<Vec>> uVerts, dVerts;
  std::vector<std::size_t> uIdx, dIdx;
};

Vec theta_of(const ControlParameterization& param, const Discrete& st, const Vec& x0) {
  Vec theta(param.size());
  const int m = param.m, n = param.n;
  for (int j = 0; j < param.uCount(); ++j) theta.segment(j * m, m) = st.uVerts[static_cast<std::size_t>(j)][st.uIdx[static_cast<std::size_t>(j)]];
  const int off = m * param.uCount();
  for (int j = 0; j < param.dCount(); ++j)
    theta.segment(off + j * (n + m), n + m) = st.dVerts[static_cast<std::size_t>(j)][st.dIdx[static_cast<std::size_t>(j)]];
  if (param.freeInitialState) theta.tail(n) = x0;
  return theta;
}

std::size_t nearest_index(const std::vector<Vec>& verts, const Vec& v) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const double dd = (verts[i] - v).squaredNorm();
    if (dd < bd) {
      bd = dd;
      best = i;
    }
  }
  return best;
}

struct Inner {
  Process proc;
  MultiplierSet mult;
  int iterations = 0;
  double gradNorm = 0.0;
  bool converged = false;
  std::string message;
};

Inner solve_continuous(const ProblemSpec& spec, const Setup& s, const SolveOptions& options) {
  const auto& param = s.param;
  auto build = [&](const Vec& theta) {
    return make_process(spec, param.control(theta), param.data(theta, s.d0), param.initialState(theta, s.x0), s.step);
  };
  auto objective = [&](const Vec& theta, bool withGrad) {
    Evaluation ev;
    const Process proc = build(theta);
    ev.cost = proc.cost;
    if (!withGrad) return ev;
    const MultiplierSet mult = normal_costate(spec, proc, s.step);
    ev.gradient.resize(param.size());
    const Mat gu = control_gradient(spec, proc, mult, param.uMesh);
    for (int j = 0; j < param.uCount(); ++j) ev.gradient.segment(j * param.m, param.m) = gu.col(j);
    if (param.dCount() > 0) {
      const Mat gd = initial_data_gradient(spec, proc, mult, param.dMesh);
      const int off = param.m * param.uCount();
      for (int j = 0; j < param.dCount(); ++j)
        ev.gradient.segment(off + j * (param.n + param.m), param.n + param.m) = gd.col(j);
    }
    if (param.freeInitialState) {
      const EndpointGradient g = spec.g.gradient(proc.x(spec.S), proc.x(proc.T), proc.T);
      ev.gradient.tail(param.n) = g.xS - mult.p(spec.S);
    }
    return ev;
  };
  auto project = [&](const Vec& theta) { return project_theta(spec, param, theta); };
  const DriverResult dr =
      minimize_projected(objective, project, param.weights(), param.pack(s.u0, s.d0, s.x0), options);
  Inner out;
  out.proc = build(dr.theta);
  out.mult = normal_costate(spec, out.proc, s.step);
  out.iterations = dr.iterations;
  out.gradNorm = dr.gradNorm;
  out.converged = dr.converged;
  out.message = dr.message;
  return out;
}

Inner solve_discrete(const ProblemSpec& spec, const Setup& s, const SolveOptions& options) {
  const auto& param = s.param;
  if (param.freeInitialState) throw Unsupported("finite control sets need a fixed initial state");
  if (param.dCount() > 0 && family_of(*spec.D) != SetFamily::Discrete)
    throw Unsupported("finite control sets need a fixed or finite initial-data set");
  Discrete st;
  for (int j = 0; j < param.uCount(); ++j) {
    st.uVerts.push_back(spec.U.at(param.uMesh[static_cast<std::size_t>(j)]).vertices());
    st.uIdx.push_back(nearest_index(st.uVerts.back(), s.u0(param.uMesh[static_cast<std::size_t>(j)])));
  }
  for (int j = 0; j < param.dCount(); ++j) {
    const double t = param.dMesh[static_cast<std::size_t>(j)];
    st.dVerts.push_back(spec.D->at(t).vertices());
    Vec cur(param.n + param.m);
    cur << s.d0.dx(t), s.d0.du(t);
    st.dIdx.push_back(nearest_index(st.dVerts.back(), cur));
  }
  auto build = [&](const Discrete& x) {
    const Vec theta = theta_of(param, x, s.x0);
    return make_process(spec, param.control(theta), param.data(theta, s.d0), s.x0, s.step);
  };

  Inner out;
  Process cur = build(st);
  int passes = 0;
  // Hamiltonian sweeps: move every interval to its integrated argmax.
  for (; passes < options.maxOuterIter; ++passes) {
    const MultiplierSet mult = normal_costate(spec, cur, s.step);
    const auto nodes = quadrature_grid(spec, cur);
    Discrete next = st;
    auto pick = [&](const std::vector<Vec>& verts, double a, double b, bool data, std::size_t keep) {
      std::size_t best = keep;
      double bestScore = -std::numeric_limits<double>::infinity();
      for (std::size_t v = 0; v < verts.size(); ++v) {
        const double sc = interval_score(spec, cur, mult, nodes, a, b, verts[v], data);
        if (sc > bestScore + 1e-12 * (1.0 + std::abs(bestScore))) {
          bestScore = sc;
          best = v;
        }
      }
      return best;
    };
    for (int j = 0; j < param.uCount(); ++j)
      next.uIdx[static_cast<std::size_t>(j)] = pick(st.uVerts[static_cast<std::size_t>(j)], param.uMesh[static_cast<std::size_t>(j)],
                                                    param.uMesh[static_cast<std::size_t>(j) + 1], false, st.uIdx[static_cast<std::size_t>(j)]);
    if (param.dCount() > 0) {
      std::vector<std::vector<double>> dl{param.dMesh, cur.d.dx.times(), cur.d.du.times()};
      for (int k = 1; k < spec.delays.count(); ++k) {
        dl.push_back(shifted(cur.x.times(), -spec.delays[k]));
        dl.push_back(shifted(cur.u.times(), -spec.delays[k]));
      }
      const auto dnodes = merged_grid(dl, spec.S - spec.h(), spec.S);
      for (int j = 0; j < param.dCount(); ++j) {
        const double a = param.dMesh[static_cast<std::size_t>(j)], b = param.dMesh[static_cast<std::size_t>(j) + 1];
        const auto& verts = st.dVerts[static_cast<std::size_t>(j)];
        std::size_t best = st.dIdx[static_cast<std::size_t>(j)];
        double bestScore = -std::numeric_limits<double>::infinity();
        for (std::size_t v = 0; v < verts.size(); ++v) {
          const double sc = interval_score(spec, cur, mult, dnodes, a, b, verts[v], true);
          if (sc > bestScore + 1e-12 * (1.0 + std::abs(bestScore))) {
            bestScore = sc;
            best = v;
          }
        }
        next.dIdx[static_cast<std::size_t>(j)] = best;
      }
    }
    if (next.uIdx == st.uIdx && next.dIdx == st.dIdx) break;
    Process cand = build(next);
    if (!(cand.cost < cur.cost)) break;
    st = std::move(next);
    cur = std::move(cand);
  }
  // Single-interval flips until no flip lowers the cost.
  bool improved = true;
  for (; improved && passes < 4 * options.maxOuterIter; ++passes) {
    improved = false;
    auto tryFlips = [&](std::vector<std::size_t> Discrete::*idx, const std::vector<std::vector<Vec>>& verts) {
      for (std::size_t j = 0; j < verts.size(); ++j) {
        for (std::size_t v = 0; v < verts[j].size(); ++v) {
          if (v == (st.*idx)[j]) continue;
          Discrete trial = st;
          (trial.*idx)[j] = v;
          Process cand = build(trial);
          if (cand.cost < cur.cost - 1e-13 * (1.0 + std::abs(cur.cost))) {
            st = std::move(trial);
            cur = std::move(cand);
            improved = true;
          }
        }
      }
    };
    tryFlips(&Discrete::uIdx, st.uVerts);
    tryFlips(&Discrete::dIdx, st.dVerts);
  }
  out.proc = std::move(cur);
  out.mult = normal_costate(spec, out.proc, s.step);
  out.iterations = passes;
  out.converged = !improved;
  out.message = improved ? "flip search pass limit reached" : "no improving single-interval flip";
  return out;
}

Inner solve_inner(const ProblemSpec& spec, const SolveOptions& options) {
  spec.validate();
  const Setup s = make_setup(spec, spec.T, options);
  if (family_of(spec.U) == SetFamily::Discrete) return solve_discrete(spec, s, options);
  if (s.dataFree && family_of(*spec.D) == SetFamily::Discrete)
    throw Unsupported("finite initial-data sets need a finite control set");
  return solve_continuous(spec, s, options);
}

SolveResult finish(const ProblemSpec& spec, Inner inner, const SolveOptions& options) {
  SolveResult r;
  r.process = std::move(inner.proc);
  r.multipliers = std::move(inner.mult);
  r.iterations = inner.iterations;
  r.gradNorm = inner.gradNorm;
  r.converged = inner.converged;
  r.message = std::move(inner.message);
  if (options.audit) {
    AuditOptions ao = options.auditOptions;
    ao.seed = options.seed;
    r.audit = full_audit(spec, r.process, r.multipliers, ao);
  }
  return r;
}

}  // namespace

SolveResult solve_fixed_time(const ProblemSpec& spec, const SolveOptions& options) {
  if (spec.freeTime) throw InvalidArgument("solve_fixed_time needs a fixed end time");
  return finish(spec, solve_inner(spec, options), options);
}

SolveResult solve_free_time(const ProblemSpec& spec, const SolveOptions& options) {
  if (!spec.freeTime) throw InvalidArgument("solve_free_time needs a free end-time problem");
  if (spec.delays.N() > 0 && spec.usesDelayedControls)
    throw Unsupported("free end-time problems with delayed controls are not supported");
  Interval br;
  if (options.timeSearch.bracket)
    br = *options.timeSearch.bracket;
  else if (spec.timeBracket)
    br = *spec.timeBracket;
  else if (std::isfinite(spec.timeBounds.lo) && std::isfinite(spec.timeBounds.hi))
    br = spec.timeBounds;
  else
    throw InvalidArgument("free end-time solve needs a time bracket");
  if (!(br.hi > br.lo)) throw InvalidArgument("time bracket must have lo < hi");
  if (!(br.lo - spec.S > spec.h())) throw InvalidArgument("time bracket must satisfy lo - S > h");
  if (!(options.timeSearch.tol > 0.0)) throw InvalidArgument("time search tolerance must be positive");

  SolveResult best;
  double bestCost = std::numeric_limits<double>::infinity();
  std::vector<TimeProbe> probes;
  Inner bestInner;
  auto probe = [&](double T) {
    ProblemSpec fixed = at_time(spec, T);
    fixed.freeTime = false;
    Inner in = solve_inner(fixed, options);
    TimeProbe tp{T, in.proc.cost, std::numeric_limits<double>::quiet_NaN()};
    try {
      const double span = T - spec.S;
      const double window = std::min(0.05 * span, 0.5 * (span - spec.h()));
      tp.eq6Residual = transversality_free(at_time(spec, T), in.proc, in.mult, window, options.seed).twoSidedResidual;
    } catch (const Error&) {
    }
    probes.push_back(tp);
    if (in.proc.cost < bestCost) {
      bestCost = in.proc.cost;
      bestInner = std::move(in);
    }
    return tp.cost;
  };

  const double rho = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = br.lo, b = br.hi;
  double c = b - rho * (b - a), d = a + rho * (b - a);
  double fc = probe(c), fd = probe(d);
  while (b - a > options.timeSearch.tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - rho * (b - a);
      fc = probe(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + rho * (b - a);
      fd = probe(d);
    }
  }
  const ProblemSpec atBest = at_time(spec, bestInner.proc.T);
  SolveResult r = finish(atBest, std::move(bestInner), options);
  r.probes = std::move(probes);
  return r;
}

SolveResult solve(const ProblemSpec& spec, const SolveOptions& options) {
  return spec.freeTime ? solve_free_time(spec, options) : solve_fixed_time(spec, options);
}

}  // namespace delaypmp
