#include "delaypmp/ddesim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "delaypmp/errors.hpp"
#include "detail.hpp"

namespace delaypmp {

namespace {

constexpr double kStageOffset[4] = {0.0, 0.5, 0.5, 1.0};
constexpr Side kStageSide[4] = {Side::Point, Side::Point, Side::Point, Side::Left};

void check_inputs(const ProblemSpec& spec, const Trajectory& u, const InitialData& d, const Vec& x0) {
  if (x0.size() != spec.n) throw InvalidArgument("initial state has wrong dimension");
  if (!x0.allFinite()) throw InvalidArgument("initial state is not finite");
  if (u.dim() != spec.m) throw InvalidArgument("control has wrong dimension");
  if (d.dx.dim() != spec.n || d.du.dim() != spec.m) throw InvalidArgument("initial data has wrong dimension");
  if (!u.contains(spec.S) || !u.contains(spec.T)) throw InvalidArgument("control must be defined on [S, T]");
  const double h = spec.h();
  if (!d.dx.contains(spec.S - h) || !d.dx.contains(spec.S) || !d.du.contains(spec.S - h) ||
      !d.du.contains(spec.S))
    throw InvalidArgument("initial data must be defined on [S - h, S]");
}

/// Linear interpolation of the first `filled` columns of a uniform sample matrix.
Vec interpolate_uniform(const Mat& xs, double a, double dt, int filled, double t) {
  const double r = (t - a) / dt;
  int q = static_cast<int>(std::floor(r));
  q = std::clamp(q, 0, filled - 1);
  if (q == filled - 1) return xs.col(q);
  const double w = std::clamp(r - q, 0.0, 1.0);
  return (1.0 - w) * xs.col(q) + w * xs.col(q + 1);
}

Trajectory picard_map(const ProblemSpec& spec, const Trajectory& u, const InitialData& d, const Vec& x0,
                      const Trajectory& cur) {
  Mat vals(spec.n, cur.size());
  Vec acc = x0;
  vals.col(0) = acc;
  for (int i = 0; i + 1 < cur.size(); ++i) {
    const double a = cur.time(i), b = cur.time(i + 1);
    const Vec fa = spec.f.value(delayed_args(spec.delays, cur, u, d, a, Side::Point));
    const Vec fm = spec.f.value(delayed_args(spec.delays, cur, u, d, 0.5 * (a + b), Side::Point));
    const Vec fb = spec.f.value(delayed_args(spec.delays, cur, u, d, b, Side::Left));
    detail::require_finite(fa, "f");
    detail::require_finite(fm, "f");
    detail::require_finite(fb, "f");
    acc += (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    vals.col(i + 1) = acc;
  }
  return Trajectory(cur.times(), std::move(vals), Interp::Linear);
}

double sup_distance(const Trajectory& a, const Trajectory& b) {
  return (a.values() - b.values()).colwise().norm().maxCoeff();
}

}  // namespace

StepGrid make_step_grid(double a, double b, double step, const DelayGrid& delays) {
  if (!(step > 0.0) || !std::isfinite(step)) throw InvalidArgument("step must be positive");
  if (!(b > a)) throw InvalidArgument("step grid needs a < b");
  StepGrid g;
  g.a = a;
  g.b = b;
  g.K = std::max(1, static_cast<int>(std::ceil((b - a) / step - 1e-9)));
  g.dt = (b - a) / g.K;
  g.aligned = true;
  g.offsets.assign(static_cast<std::size_t>(delays.count()), 0);
  for (int k = 1; k < delays.count(); ++k) {
    const double r = delays[k] / g.dt;
    const double nearest = std::round(r);
    if (nearest < 1.0 || std::abs(r - nearest) > 1e-9 * std::max(1.0, r)) {
      g.aligned = false;
      break;
    }
    g.offsets[static_cast<std::size_t>(k)] = static_cast<int>(nearest);
  }
  if (!g.aligned && delays.count() > 1 && delays[1] < g.dt)
    throw InvalidArgument("step " + std::to_string(g.dt) + " exceeds the smallest delay " +
                          std::to_string(delays[1]) + " and is not aligned with the delays");
  return g;
}

SimReport simulate(const ProblemSpec& spec, const Trajectory& u, const InitialData& d, const Vec& x0,
                   double step) {
  check_inputs(spec, u, d, x0);
  const StepGrid g = make_step_grid(spec.S, spec.T, step, spec.delays);
  const int n = spec.n;
  const int slots = spec.delays.count();
  const double S = spec.S;

  Mat xs(n, g.K + 1);
  xs.col(0) = x0;
  Mat stages;
  if (g.aligned) stages.resize(n, 4 * static_cast<Eigen::Index>(g.K));

  DelayedArgs args;
  args.x.resize(n, slots);
  args.u.resize(spec.m, slots);
  Vec k[4];
  for (int i = 0; i < g.K; ++i) {
    const Vec xi = xs.col(i);
    for (int s = 0; s < 4; ++s) {
      Vec Xs = xi;
      if (s == 1 || s == 2) Xs += 0.5 * g.dt * k[s - 1];
      if (s == 3) Xs += g.dt * k[2];
      if (g.aligned) stages.col(4 * i + s) = Xs;
      const double tau = s == 3 ? g.time(i + 1) : g.time(i) + kStageOffset[s] * g.dt;
      const Side side = kStageSide[s];
      args.t = tau;
      args.side = side;
      args.x.col(0) = Xs;
      for (int kk = 1; kk < slots; ++kk) {
        const double past = tau - spec.delays[kk];
        if (g.aligned) {
          const int j = i - g.offsets[static_cast<std::size_t>(kk)];
          args.x.col(kk) = j >= 0 ? Vec(stages.col(4 * j + s)) : detail::history_state(d.dx, x0, S, past, side);
        } else if (past > S && !detail::same_time(past, S)) {
          args.x.col(kk) = interpolate_uniform(xs, S, g.dt, i + 1, past);
        } else {
          args.x.col(kk) = detail::history_state(d.dx, x0, S, past, side);
        }
      }
      for (int kk = 0; kk < slots; ++kk)
        args.u.col(kk) = detail::control_slot(u, d.du, S, tau - spec.delays[kk], side);
      k[s] = spec.f.value(args);
      detail::require_finite(k[s], "f");
    }
    xs.col(i + 1) = xi + g.dt / 6.0 * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3]);
  }

  SimReport rep;
  rep.trajectory = Trajectory(g.times(), std::move(xs), Interp::Linear);
  rep.aligned = g.aligned;
  rep.defect = simulation_defect(spec, rep.trajectory, u, d);
  const auto kInt = lipschitz_integral(spec, spec.S, spec.T);
  rep.certifiedBound = kInt ? filippov_bound(rep.defect, *kInt, spec.delays.N())
                            : std::numeric_limits<double>::infinity();
  return rep;
}

SimReport picard_solve(const ProblemSpec& spec, const Trajectory& u, const InitialData& d, const Vec& x0,
                       const Trajectory& seed, int maxIter, double tol) {
  check_inputs(spec, u, d, x0);
  if (maxIter < 1) throw InvalidArgument("picard_solve needs maxIter >= 1");
  if (!(tol > 0.0)) throw InvalidArgument("picard_solve needs tol > 0");
  if (seed.dim() != spec.n || !detail::same_time(seed.start(), spec.S) || !detail::same_time(seed.end(), spec.T))
    throw InvalidArgument("picard seed must be an n-dimensional trajectory on [S, T]");
  if (seed.interp() != Interp::Linear) throw InvalidArgument("picard seed must use linear interpolation");

  SimReport rep;
  Trajectory cur = picard_map(spec, u, d, x0, seed);
  rep.picardChanges.push_back(sup_distance(cur, seed));
  rep.converged = false;
  int j = 1;
  for (; j <= maxIter; ++j) {
    Trajectory next = picard_map(spec, u, d, x0, cur);
    const double change = sup_distance(next, cur);
    rep.picardChanges.push_back(change);
    if (change <= tol) {
      rep.converged = true;
      break;
    }
    if (j == maxIter) break;
    cur = std::move(next);
  }
  rep.picardIterations = j;
  rep.trajectory = std::move(cur);
  rep.defect = simulation_defect(spec, rep.trajectory, u, d);
  const auto kInt = lipschitz_integral(spec, spec.S, spec.T);
  rep.certifiedBound = kInt ? filippov_bound(rep.defect, *kInt, spec.delays.N())
                            : std::numeric_limits<double>::infinity();
  return rep;
}

double filippov_bound(double defect0, double kIntegral, int N) {
  if (!(defect0 >= 0.0) || !(kIntegral >= 0.0) || N < 0)
    throw InvalidArgument("filippov_bound needs defect >= 0, integral of k >= 0 and N >= 0");
  if (defect0 == 0.0) return 0.0;
  return defect0 * std::exp((N + 1) * kIntegral);
}

double simulation_defect(const ProblemSpec& spec, const Trajectory& x, const Trajectory& u,
                         const InitialData& d) {
  double total = 0.0;
  for (int i = 0; i + 1 < x.size(); ++i) {
    const double a = x.time(i), b = x.time(i + 1);
    const Vec fm = spec.f.value(delayed_args(spec.delays, x, u, d, 0.5 * (a + b), Side::Point));
    detail::require_finite(fm, "f");
    total += (x.sample(i + 1) - x.sample(i) - (b - a) * fm).norm();
  }
  return total;
}

std::optional<double> lipschitz_integral(const ProblemSpec& spec, double a, double b) {
  if (!spec.lipschitz) return std::nullopt;
  constexpr int kIntervals = 200;  // even, composite Simpson
  const double h = (b - a) / kIntervals;
  double acc = spec.lipschitz(a) + spec.lipschitz(b);
  for (int i = 1; i < kIntervals; ++i) acc += (i % 2 ? 4.0 : 2.0) * spec.lipschitz(a + i * h);
  const double v = acc * h / 3.0;
  if (!std::isfinite(v) || v < 0.0) throw NumericalError("Lipschitz modulus integral is not a finite non-negative number");
  return v;
}

Process make_process(const ProblemSpec& spec, const Trajectory& u, const InitialData& d, const Vec& x0,
                     double step) {
  Process p;
  p.x = simulate(spec, u, d, x0, step).trajectory;
  p.u = u;
  p.d = d;
  p.T = spec.T;
  p.cost = total_cost(spec, p);
  return p;
}

}  // namespace delaypmp
