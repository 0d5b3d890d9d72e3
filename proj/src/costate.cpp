#include "delaypmp/costate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "delaypmp/ddesim.hpp"
#include "delaypmp/errors.hpp"
#include "delaypmp/maximize.hpp"
#include "detail.hpp"

namespace delaypmp {

namespace {

/// Whether chi_[S, T - h_k] is on at t, read as a right limit (Point) or a left limit.
bool advance_active(double t, Side side, double hk, double S, double T) {
  const double end = T - hk;
  if (side == Side::Left) return t > S + detail::snap_tol(S) && t <= end + detail::snap_tol(end);
  return t >= S - detail::snap_tol(S) && t < end - detail::snap_tol(end);
}

/// G_k(tau) = (d_{x_k} f)^T p - lambda d_{x_k} L at tau.
Vec advance_term(const ProblemSpec& spec, const Process& proc, const Vec& p, double lambda, double tau, Side side,
                 int k) {
  const DelayedArgs args = delayed_args(spec.delays, proc.x, proc.u, proc.d, tau, side);
  Vec g = spec.f.dx(args, k).transpose() * p;
  if (lambda != 0.0 && spec.L.dx) g -= lambda * spec.L.dx(args, k);
  detail::require_finite(g, "adjoint right-hand side");
  return g;
}

void require_derivatives(const ProblemSpec& spec) {
  if (!spec.f.dx) throw Unsupported("costate needs the state Jacobians of f");
  if (spec.L.value && !spec.L.dx) throw Unsupported("costate needs the state gradients of L");
}

Vec interpolate_columns(const Mat& xs, double a, double dt, int lowest, int highest, double t) {
  int q = static_cast<int>(std::floor((t - a) / dt));
  q = std::clamp(q, lowest, highest - 1);
  const double w = std::clamp((t - (a + q * dt)) / dt, 0.0, 1.0);
  return (1.0 - w) * xs.col(q) + w * xs.col(q + 1);
}

}  // namespace

MultiplierSet costate_solve(const ProblemSpec& spec, const Process& proc, double lambda, const Vec& pT,
                            double step) {
  require_derivatives(spec);
  if (pT.size() != spec.n) throw InvalidArgument("terminal costate has wrong dimension");
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
  const double S = spec.S, T = proc.T;
  const StepGrid g = make_step_grid(S, T, step, spec.delays);
  const int n = spec.n, slots = spec.delays.count(), K = g.K;

  std::vector<Mat> P(static_cast<std::size_t>(slots), Mat::Zero(n, K + 1));
  P[0].col(K) = pT;
  Mat total(n, K + 1);
  total.col(K) = pT;
  Mat stages;
  if (g.aligned) stages.resize(n, 4 * static_cast<Eigen::Index>(K));

  std::vector<Vec> stageState(static_cast<std::size_t>(slots));
  std::vector<std::array<Vec, 4>> rate(static_cast<std::size_t>(slots));
  for (int i = K - 1; i >= 0; --i) {
    for (int s = 0; s < 4; ++s) {
      const double tau = s == 0 ? g.time(i + 1) : (s == 3 ? g.time(i) : g.time(i) + 0.5 * g.dt);
      const Side side = s == 0 ? Side::Left : Side::Point;
      Vec sum = Vec::Zero(n);
      for (int k = 0; k < slots; ++k) {
        Vec st = P[static_cast<std::size_t>(k)].col(i + 1);
        if (s == 1 || s == 2) st += 0.5 * g.dt * rate[static_cast<std::size_t>(k)][s - 1];
        if (s == 3) st += g.dt * rate[static_cast<std::size_t>(k)][2];
        sum += st;
        stageState[static_cast<std::size_t>(k)] = std::move(st);
      }
      if (g.aligned) stages.col(4 * i + s) = sum;
      for (int k = 0; k < slots; ++k) {
        const double hk = spec.delays[k];
        Vec& r = rate[static_cast<std::size_t>(k)][s];
        if (k == 0) {
          r = advance_term(spec, proc, sum, lambda, tau, side, 0);
          continue;
        }
        if (!advance_active(tau, side, hk, S, T)) {
          r = Vec::Zero(n);
          continue;
        }
        Vec ahead;
        if (g.aligned) {
          ahead = stages.col(4 * (i + g.offsets[static_cast<std::size_t>(k)]) + s);
        } else {
          ahead = interpolate_columns(total, S, g.dt, i + 1, K, tau + hk);
        }
        r = advance_term(spec, proc, ahead, lambda, tau + hk, side, k);
      }
    }
    Vec newTotal = Vec::Zero(n);
    for (int k = 0; k < slots; ++k) {
      auto& r = rate[static_cast<std::size_t>(k)];
      auto col = P[static_cast<std::size_t>(k)].col(i);
      col = P[static_cast<std::size_t>(k)].col(i + 1) + g.dt / 6.0 * (r[0] + 2.0 * r[1] + 2.0 * r[2] + r[3]);
      newTotal += col;
    }
    total.col(i) = newTotal;
  }

  // Sample grid: the step grid plus T - h_k wherever that falls inside a cell.
  const std::vector<double> base = g.times();
  std::vector<double> extra;
  for (int k = 1; k < slots; ++k) {
    const double e = T - spec.delays[k];
    if (e <= S || g.aligned) continue;
    const double r = (e - S) / g.dt;
    if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r)) extra.push_back(e);
  }
  const std::vector<std::vector<double>> lists{base, extra};
  const std::vector<double> all = merged_grid(lists, S, T);

  MultiplierSet out;
  out.lambda = lambda;
  Mat psum = Mat::Zero(n, static_cast<Eigen::Index>(all.size()));
  for (int k = 0; k < slots; ++k) {
    const double hk = spec.delays[k];
    std::vector<double> times = base;
    Mat vals = P[static_cast<std::size_t>(k)];
    const double e = T - hk;
    if (k > 0 && std::find(extra.begin(), extra.end(), e) != extra.end()) {
      const auto pos = std::upper_bound(times.begin(), times.end(), e) - times.begin();
      times.insert(times.begin() + pos, e);
      Mat grown(n, vals.cols() + 1);
      grown << vals.leftCols(pos), Vec::Zero(n), vals.rightCols(vals.cols() - pos);
      vals = std::move(grown);
    }
    Trajectory onMain(times, vals, Interp::Linear);
    Trajectory onAll = onMain.resampled(all);
    psum += onAll.values();
    if (k > 0) {
      std::vector<double> ext{S - hk};
      ext.insert(ext.end(), all.begin(), all.end());
      Mat ev(n, onAll.size() + 1);
      ev << onAll.values().col(0), onAll.values();
      onAll = Trajectory(std::move(ext), std::move(ev), Interp::Linear);
    }
    out.components.push_back(std::move(onAll));
  }
  out.p = Trajectory(all, std::move(psum), Interp::Linear);
  return out;
}

Vec adjoint_rhs(const ProblemSpec& spec, const Process& proc, const Trajectory& p, double lambda, double t,
                Side side) {
  require_derivatives(spec);
  const double S = spec.S, T = proc.T;
  Vec r = advance_term(spec, proc, p(t, side), lambda, t, side, 0);
  for (int k = 1; k < spec.delays.count(); ++k) {
    const double hk = spec.delays[k];
    if (!advance_active(t, side, hk, S, T)) continue;
    r += advance_term(spec, proc, p(t + hk, side), lambda, t + hk, side, k);
  }
  return r;
}

double adjoint_defect(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult) {
  const Trajectory& p = mult.p;
  double total = 0.0;
  for (int i = 0; i + 1 < p.size(); ++i) {
    const double a = p.time(i), b = p.time(i + 1);
    const Vec ra = adjoint_rhs(spec, proc, p, mult.lambda, a, Side::Point);
    const Vec rm = adjoint_rhs(spec, proc, p, mult.lambda, 0.5 * (a + b), Side::Point);
    const Vec rb = adjoint_rhs(spec, proc, p, mult.lambda, b, Side::Left);
    total += (p.sample(i) - p.sample(i + 1) - (b - a) / 6.0 * (ra + 4.0 * rm + rb)).norm();
  }
  return total;
}

namespace {

Vec endpoint_normal_residual(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult,
                             EndpointGradient& grad) {
  if (!spec.g.gradient) throw Unsupported("transversality needs the gradient of g");
  const Vec xS = proc.x(spec.S), xT = proc.x(proc.T);
  grad = spec.g.gradient(xS, xT, proc.T);
  Vec w(2 * spec.n);
  w << mult.p(spec.S) - mult.lambda * grad.xS, -mult.p(proc.T) - mult.lambda * grad.xT;
  return w;
}

}  // namespace

double transversality_fixed(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult) {
  EndpointGradient grad;
  const Vec w = endpoint_normal_residual(spec, proc, mult, grad);
  return spec.C.normalConeDistance(w, proc.x(spec.S), proc.x(proc.T));
}

std::vector<Interval> essential_value_ladder(std::span<const double> times, std::span<const double> values,
                                             double center, std::span<const double> ladder) {
  if (ladder.empty()) throw InvalidArgument("essential value needs a non-empty ladder");
  if (times.size() != values.size() || times.empty()) throw InvalidArgument("sample times and values differ");
  const double lo = times.front(), hi = times.back();
  const double slack = 1e-12 * std::max(1.0, std::abs(center));
  std::vector<Interval> out;
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : ladder) {
    if (!(eps > 0.0) || eps > prev) throw InvalidArgument("ladder must be positive and decreasing");
    prev = eps;
    if (center - eps < lo - slack || center + eps > hi + slack)
      throw DomainError("essential value window exceeds the sampled domain");
    Interval rung{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (std::abs(times[i] - center) > eps + slack) continue;
      rung.lo = std::min(rung.lo, values[i]);
      rung.hi = std::max(rung.hi, values[i]);
    }
    if (rung.lo > rung.hi) throw DomainError("no samples inside the essential value window");
    if (!out.empty()) {
      rung.lo = std::max(rung.lo, out.back().lo);
      rung.hi = std::min(rung.hi, out.back().hi);
    }
    out.push_back(rung);
  }
  return out;
}

Interval essential_value(std::span<const double> times, std::span<const double> values, double center,
                         std::span<const double> ladder) {
  return essential_value_ladder(times, values, center, ladder).back();
}

FreeTimeCheck transversality_free(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult,
                                  double window, std::uint64_t seed) {
  if (!spec.freeTime) throw InvalidArgument("transversality_free needs a free end-time problem");
  const double S = spec.S, Tb = proc.T, h = spec.h();
  if (!(Tb - S > h)) throw InvalidArgument("free end-time check needs T - S > h");
  if (!(window > 0.0) || window >= Tb - S - h) throw InvalidArgument("window must lie in (0, T - S - h)");
  if (spec.delays.N() > 0 && spec.usesDelayedControls)
    throw Unsupported("free end-time problems with delayed controls are not supported");

  const int slots = spec.delays.count();
  const Vec pBar = mult.p(Tb);
  DelayedArgs args;
  args.x.resize(spec.n, slots);
  args.u.resize(spec.m, slots);
  for (int k = 0; k < slots; ++k) args.x.col(k) = proc.x(Tb - spec.delays[k], k == 0 ? Side::Left : Side::Point);
  args.side = Side::Point;

  constexpr int half = 200;
  std::vector<double> times(2 * half + 1), values(2 * half + 1);
  for (int i = 0; i <= 2 * half; ++i) {
    const double t = i == half ? Tb : Tb + window * (i - half) / half;
    times[static_cast<std::size_t>(i)] = t;
    args.t = t;
    auto fn = [&](const Vec& v) {
      DelayedArgs a = args;
      for (int k = 0; k < slots; ++k) a.u.col(k) = v;
      double val = pBar.dot(spec.f.value(a));
      if (mult.lambda != 0.0 && spec.L.value) val -= mult.lambda * spec.L.value(a);
      return val;
    };
    const SetMaximum best = maximize_over(spec.U.at(t), fn, seed + static_cast<std::uint64_t>(i));
    if (!std::isfinite(best.value)) throw NumericalError("maximized Hamiltonian is not finite near T");
    values[static_cast<std::size_t>(i)] = best.value;
  }
  const double e0 = std::min(window, 0.1 * (Tb - S));
  const std::vector<double> ladder{e0, e0 / 2, e0 / 4, e0 / 8};

  FreeTimeCheck out;
  out.xiInterval = essential_value(times, values, Tb, ladder);
  if (out.xiInterval.width() <= 1e-8) out.xiInterval.lo = out.xiInterval.hi = 0.5 * (out.xiInterval.lo + out.xiInterval.hi);

  EndpointGradient grad;
  const Vec w = endpoint_normal_residual(spec, proc, mult, grad);
  const double spatial = spec.C.normalConeDistance(w, proc.x(S), proc.x(Tb));
  const double c = mult.lambda * grad.T;
  const Interval& I = out.xiInterval;
  const double tolB = detail::snap_tol(Tb);
  double temporal;
  if (Tb <= spec.timeBounds.lo + tolB)
    temporal = std::max(I.lo - c, 0.0);
  else if (Tb >= spec.timeBounds.hi - tolB)
    temporal = std::max(c - I.hi, 0.0);
  else
    temporal = I.distance(c);
  out.residual = std::hypot(spatial, temporal);
  out.twoSidedResidual = I.distance(c);
  out.xi = std::clamp(c, I.lo, I.hi);
  return out;
}

MultiplierSet normalize(const MultiplierSet& mult) {
  const double s = mult.lambda + mult.supP();
  if (!(s > 0.0) || !std::isfinite(s)) throw NumericalError("trivial multiplier: lambda = 0 and p = 0");
  MultiplierSet out = mult;
  out.lambda /= s;
  for (auto& c : out.components) c = Trajectory(c.times(), c.values() / s, c.interp());
  out.p = Trajectory(out.p.times(), out.p.values() / s, out.p.interp());
  if (out.xi) *out.xi /= s;
  return out;
}

}  // namespace delaypmp
