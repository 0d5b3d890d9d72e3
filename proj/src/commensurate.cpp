#include "delaypmp/commensurate.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "delaypmp/catalog.hpp"
#include "delaypmp/errors.hpp"
#include "detail.hpp"

namespace delaypmp {

namespace {

struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;
};

std::optional<Fraction> rationalize(double v) {
  constexpr std::int64_t kMaxDen = 1000000;
  long double x = v;
  std::int64_t h1 = 1, h2 = 0, k1 = 0, k2 = 1;
  for (int it = 0; it < 64; ++it) {
    const long double a = std::floor(x);
    if (a > 1e15L) return std::nullopt;
    const auto ai = static_cast<std::int64_t>(a);
    const std::int64_t h = ai * h1 + h2, k = ai * k1 + k2;
    if (k > kMaxDen) return std::nullopt;
    if (std::abs(v - static_cast<double>(h) / static_cast<double>(k)) <= 1e-12 * std::abs(v)) return Fraction{h, k};
    const long double frac = x - a;
    if (frac < 1e-18L) return std::nullopt;
    x = 1.0L / frac;
    h2 = h1;
    h1 = h;
    k2 = k1;
    k1 = k;
  }
  return std::nullopt;
}

/// Shared data for the stacked evaluators.
struct Blocks {
  ProblemSpec orig;
  int r = 1;
  double hb = 1.0;
  std::vector<int> mult;

  DelayedArgs args(const DelayedArgs& a, int j) const {
    const int n = orig.n, m = orig.m, slots = orig.delays.count();
    const double S = orig.S;
    DelayedArgs b;
    b.t = S + j * hb + a.t;
    b.side = a.side;
    b.x.resize(n, slots);
    b.u.resize(m, slots);
    for (int k = 0; k < slots; ++k) {
      const int idx = j - mult[static_cast<std::size_t>(k)];
      if (idx >= 0) {
        b.x.col(k) = a.x.col(0).segment(idx * n, n);
        b.u.col(k) = a.u.col(0).segment(idx * m, m);
        continue;
      }
      const double tau = S + idx * hb + a.t;
      b.x.col(k) = detail::history_state(orig.initialData.dx, orig.x0, S, tau, a.side);
      // The first block's control at s = h is not visible here; the left limit is used.
      b.u.col(k) = detail::same_time(tau, S) ? orig.initialData.du(S, Side::Left) : orig.initialData.du(tau, a.side);
    }
    return b;
  }
};

ControlSet product_set(const std::vector<ControlSet>& parts) {
  bool allBox = true, allDiscrete = true;
  for (const auto& p : parts) {
    allBox = allBox && p.kind() == ControlSet::Kind::Box;
    allDiscrete = allDiscrete && p.kind() != ControlSet::Kind::Box;
  }
  if (allBox) {
    Vec lo(0), hi(0);
    for (const auto& p : parts) {
      Vec l2(lo.size() + p.dim()), h2(hi.size() + p.dim());
      l2 << lo, p.lo();
      h2 << hi, p.hi();
      lo = std::move(l2);
      hi = std::move(h2);
    }
    return ControlSet::box(lo, hi);
  }
  if (!allDiscrete) throw Unsupported("stacking mixes box and finite control sets");
  std::vector<Vec> pts{Vec(0)};
  for (const auto& p : parts) {
    std::vector<Vec> next;
    for (const auto& a : pts)
      for (const auto& b : p.points()) {
        Vec c(a.size() + b.size());
        c << a, b;
        next.push_back(std::move(c));
      }
    if (next.size() > 4096) throw Unsupported("stacked finite control set is too large");
    pts = std::move(next);
  }
  return pts.size() == 1 ? ControlSet::fixed(pts[0]) : ControlSet::finite(std::move(pts));
}

double initial_cost_integral(const ProblemSpec& spec) {
  const double S = spec.S, h = spec.h();
  if (!(h > 0.0) || !spec.Lambda.value) return 0.0;
  const auto& d = spec.initialData;
  std::vector<std::vector<double>> lists{d.dx.times(), d.du.times()};
  const auto grid = merged_grid(lists, S - h, S);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double a = grid[i], b = grid[i + 1];
    acc += 0.5 * (b - a) *
           (spec.Lambda.value(a, d.dx(a), d.du(a)) + spec.Lambda.value(b, d.dx(b, Side::Left), d.du(b, Side::Left)));
  }
  return acc;
}

}  // namespace

std::optional<double> check_commensurate(const DelayGrid& grid, double horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) return std::nullopt;
  std::vector<double> values{horizon};
  for (int k = 1; k < grid.count(); ++k) values.push_back(grid[k]);
  std::vector<Fraction> fr;
  for (double v : values) {
    const auto f = rationalize(v);
    if (!f) return std::nullopt;
    fr.push_back(*f);
  }
  __int128 L = 1;
  for (const auto& f : fr) {
    L = L / std::gcd(static_cast<std::int64_t>(L), f.den) * f.den;
    if (L > static_cast<__int128>(1e15)) return std::nullopt;
  }
  std::int64_t G = 0;
  for (const auto& f : fr) {
    const __int128 a = static_cast<__int128>(f.num) * (L / f.den);
    if (a > static_cast<__int128>(4e18)) return std::nullopt;
    G = std::gcd(G, static_cast<std::int64_t>(a));
  }
  if (G <= 0) return std::nullopt;
  return static_cast<double>(G) / static_cast<double>(L);
}

Trajectory StackedProblem::stack(const Trajectory& x) const {
  const int r = stackCount, dim = x.dim();
  const double hb = baseStep;
  std::vector<std::vector<double>> lists;
  for (int j = 0; j < r; ++j) {
    std::vector<double> local;
    for (double t : x.times()) {
      const double s = t - globalTime(j, 0.0);
      if (s > -detail::snap_tol(hb) && s < hb + detail::snap_tol(hb)) local.push_back(std::clamp(s, 0.0, hb));
    }
    lists.push_back(std::move(local));
  }
  const auto times = merged_grid(lists, 0.0, hb);
  Mat vals(r * dim, static_cast<Eigen::Index>(times.size()));
  for (std::size_t i = 0; i < times.size(); ++i) {
    const bool last = i + 1 == times.size();
    for (int j = 0; j < r; ++j) {
      const double t = last ? globalTime(j + 1, 0.0) : globalTime(j, times[i]);
      vals.col(static_cast<Eigen::Index>(i)).segment(j * dim, dim) =
          x(std::clamp(t, x.start(), x.end()), last ? Side::Left : Side::Point);
    }
  }
  return Trajectory(times, std::move(vals), x.interp());
}

Trajectory StackedProblem::unstack(const Trajectory& y) const {
  const int r = stackCount;
  if (y.dim() % r != 0) throw InvalidArgument("inconsistent stack dimensions");
  const int dim = y.dim() / r;
  std::vector<double> times;
  std::vector<Vec> cols;
  for (int j = 0; j < r; ++j) {
    const int count = j + 1 < r ? y.size() - 1 : y.size();
    for (int i = 0; i < count; ++i) {
      const double t = j + 1 == r && i + 1 == y.size() ? original.T : globalTime(j, y.time(i));
      if (!times.empty() && t <= times.back()) continue;
      times.push_back(t);
      cols.push_back(y.sample(i).segment(j * dim, dim));
    }
  }
  Mat vals(dim, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) vals.col(static_cast<Eigen::Index>(i)) = cols[i];
  return Trajectory(std::move(times), std::move(vals), y.interp());
}

StackedProblem reduce(const ProblemSpec& spec) {
  spec.validate();
  if (spec.freeTime) throw InvalidArgument("free end-time problems cannot be reduced to delay-free form");
  const auto hb = check_commensurate(spec.delays, spec.T - spec.S);
  if (!hb) throw InvalidArgument("delays and horizon are not commensurate");

  StackedProblem sp;
  sp.original = spec;
  sp.baseStep = *hb;
  sp.stackCount = static_cast<int>(std::lround((spec.T - spec.S) / *hb));
  for (int k = 0; k < spec.delays.count(); ++k)
    sp.multiples.push_back(static_cast<int>(std::lround(spec.delays[k] / *hb)));
  sp.initialCost = initial_cost_integral(spec);

  const int r = sp.stackCount, n = spec.n, m = spec.m, slots = spec.delays.count();
  auto B = std::make_shared<Blocks>();
  B->orig = spec;
  B->r = r;
  B->hb = *hb;
  B->mult = sp.multiples;

  ProblemSpec& st = sp.stacked;
  st.name = spec.name + "_stacked";
  st.S = 0.0;
  st.T = *hb;
  st.delays = DelayGrid();
  st.n = r * n;
  st.m = r * m;
  st.x0 = spec.x0.replicate(r, 1);
  st.usesDelayedControls = false;

  st.f.value = [B](const DelayedArgs& a) {
    const int n = B->orig.n;
    Vec out(B->r * n);
    for (int j = 0; j < B->r; ++j) out.segment(j * n, n) = B->orig.f.value(B->args(a, j));
    return out;
  };
  if (spec.f.dx)
    st.f.dx = [B, slots](const DelayedArgs& a, int) {
      const int n = B->orig.n;
      Mat J = Mat::Zero(B->r * n, B->r * n);
      for (int j = 0; j < B->r; ++j) {
        const DelayedArgs b = B->args(a, j);
        for (int k = 0; k < slots; ++k) {
          const int idx = j - B->mult[static_cast<std::size_t>(k)];
          if (idx >= 0) J.block(j * n, idx * n, n, n) += B->orig.f.dx(b, k);
        }
      }
      return J;
    };
  if (spec.f.du)
    st.f.du = [B, slots](const DelayedArgs& a, int) {
      const int n = B->orig.n, m = B->orig.m;
      Mat J = Mat::Zero(B->r * n, B->r * m);
      for (int j = 0; j < B->r; ++j) {
        const DelayedArgs b = B->args(a, j);
        for (int k = 0; k < slots; ++k) {
          const int idx = j - B->mult[static_cast<std::size_t>(k)];
          if (idx >= 0) J.block(j * n, idx * m, n, m) += B->orig.f.du(b, k);
        }
      }
      return J;
    };
  if (spec.L.value) {
    st.L.value = [B](const DelayedArgs& a) {
      double acc = 0.0;
      for (int j = 0; j < B->r; ++j) acc += B->orig.L.value(B->args(a, j));
      return acc;
    };
    if (spec.L.dx)
      st.L.dx = [B, slots](const DelayedArgs& a, int) {
        const int n = B->orig.n;
        Vec g = Vec::Zero(B->r * n);
        for (int j = 0; j < B->r; ++j) {
          const DelayedArgs b = B->args(a, j);
          for (int k = 0; k < slots; ++k) {
            const int idx = j - B->mult[static_cast<std::size_t>(k)];
            if (idx >= 0) g.segment(idx * n, n) += B->orig.L.dx(b, k);
          }
        }
        return g;
      };
    if (spec.L.du)
      st.L.du = [B, slots](const DelayedArgs& a, int) {
        const int m = B->orig.m;
        Vec g = Vec::Zero(B->r * m);
        for (int j = 0; j < B->r; ++j) {
          const DelayedArgs b = B->args(a, j);
          for (int k = 0; k < slots; ++k) {
            const int idx = j - B->mult[static_cast<std::size_t>(k)];
            if (idx >= 0) g.segment(idx * m, m) += B->orig.L.du(b, k);
          }
        }
        return g;
      };
  }
  const double lambdaConst = sp.initialCost;
  const double Torig = spec.T;
  st.g.value = [B, lambdaConst, Torig](const Vec& yS, const Vec& yT, double) {
    const int n = B->orig.n;
    return B->orig.g.value(yS.head(n), yT.tail(n), Torig) + lambdaConst;
  };
  if (spec.g.gradient)
    st.g.gradient = [B, Torig](const Vec& yS, const Vec& yT, double) {
      const int n = B->orig.n;
      const EndpointGradient g0 = B->orig.g.gradient(yS.head(n), yT.tail(n), Torig);
      EndpointGradient g;
      g.xS = Vec::Zero(yS.size());
      g.xT = Vec::Zero(yT.size());
      g.xS.head(n) = g0.xS;
      g.xT.tail(n) = g0.xT;
      return g;
    };
  st.Lambda = catalog::zero_initial();

  // U'(s) is the product of U(S + j h + s) over the blocks.
  std::vector<double> starts{0.0};
  for (double s0 : spec.U.starts())
    for (int j = 0; j < r; ++j) {
      const double s = s0 - sp.globalTime(j, 0.0);
      if (s > detail::snap_tol(*hb) && s < *hb - detail::snap_tol(*hb)) starts.push_back(s);
    }
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
  std::vector<ControlSet> sets;
  for (double s0 : starts) {
    std::vector<ControlSet> parts;
    for (int j = 0; j < r; ++j) parts.push_back(spec.U.at(sp.globalTime(j, s0)));
    sets.push_back(product_set(parts));
  }
  starts.front() = -std::numeric_limits<double>::infinity();
  st.U = SetSchedule(std::move(starts), std::move(sets));

  // Endpoint constraint: anchors of C plus the linkage rows.
  const int rows0 = spec.C.kind() == EndpointConstraint::Kind::Free ? 0 : n;
  const int rowsT = spec.C.kind() == EndpointConstraint::Kind::FixedBoth ? n : 0;
  if (spec.C.kind() == EndpointConstraint::Kind::Box || spec.C.kind() == EndpointConstraint::Kind::Affine)
    throw Unsupported("reduce supports free, fixed-initial and fixed-both endpoint constraints");
  const int rows = rows0 + (r - 1) * n + rowsT;
  if (r == 1) {
    st.C = spec.C;
  } else {
    Mat A = Mat::Zero(rows, 2 * r * n);
    Vec b = Vec::Zero(rows);
    if (rows0 > 0) {
      A.block(0, 0, n, n).setIdentity();
      b.head(n) = spec.C.anchorS();
    }
    for (int j = 0; j + 1 < r; ++j) {
      const int row = rows0 + j * n;
      A.block(row, (j + 1) * n, n, n).setIdentity();       // y_{j+1}(0)
      A.block(row, r * n + j * n, n, n) -= Mat::Identity(n, n);  // y_j(h)
    }
    if (rowsT > 0) {
      A.block(rows - n, r * n + (r - 1) * n, n, n).setIdentity();
      b.tail(n) = spec.C.anchorT();
    }
    st.C = EndpointConstraint::affine(std::move(A), std::move(b));
  }
  st.initialData = {Trajectory::constant(0.0, 0.0, Vec::Zero(st.n), Interp::PiecewiseConstantLeft),
                    Trajectory::constant(0.0, 0.0, Vec::Zero(st.m), Interp::PiecewiseConstantLeft)};
  if (spec.initialControl.size() == m) st.initialControl = spec.initialControl.replicate(r, 1);
  st.tolerances = spec.tolerances;
  return sp;
}

SimReport simulate_stacked(const StackedProblem& sp, const Trajectory& u, double step) {
  const int r = sp.stackCount, n = sp.original.n;
  const Trajectory v = sp.stack(u);
  Vec y0 = sp.original.x0.replicate(r, 1);
  SimReport rep;
  for (int sweep = 0; sweep < r; ++sweep) {
    rep = simulate(sp.stacked, v, sp.stacked.initialData, y0, step);
    const Vec yh = rep.trajectory(sp.baseStep);
    for (int j = 0; j + 1 < r; ++j) y0.segment((j + 1) * n, n) = yh.segment(j * n, n);
  }
  return rep;
}

Process stacked_process(const StackedProblem& sp, const Trajectory& u, double step) {
  Process p;
  p.x = simulate_stacked(sp, u, step).trajectory;
  p.u = sp.stack(u);
  p.d = sp.stacked.initialData;
  p.T = sp.baseStep;
  p.cost = total_cost(sp.stacked, p);
  return p;
}

MultiplierSet costate_stacked(const StackedProblem& sp, const Process& stackedProc, double lambda, const Vec& pT,
                              double step) {
  const int r = sp.stackCount, n = sp.original.n;
  if (pT.size() != n) throw InvalidArgument("terminal costate has wrong dimension");
  Vec qT = Vec::Zero(r * n);
  qT.tail(n) = pT;
  MultiplierSet q;
  for (int sweep = 0; sweep < r; ++sweep) {
    q = costate_solve(sp.stacked, stackedProc, lambda, qT, step);
    const Vec q0 = q.p(0.0);
    for (int j = 0; j + 1 < r; ++j) qT.segment(j * n, n) = q0.segment((j + 1) * n, n);
  }
  return q;
}

MultiplierSet lift_multipliers(const StackedProblem& sp, const Trajectory& q, const Process& original, double lambda) {
  const ProblemSpec& spec = sp.original;
  if (q.dim() != sp.stackCount * spec.n) throw InvalidArgument("inconsistent stack dimensions");
  MultiplierSet out;
  out.lambda = lambda;
  out.p = sp.unstack(q);
  const auto& ts = out.p.times();
  const int n = spec.n, slots = spec.delays.count();
  const double S = spec.S, T = spec.T;
  Mat rest = out.p.values();
  out.components.resize(static_cast<std::size_t>(slots));
  for (int k = 1; k < slots; ++k) {
    const double hk = spec.delays[k];
    auto G = [&](double t, Side side) {
      const DelayedArgs a = delayed_args(spec.delays, original.x, original.u, original.d, t + hk, side);
      Vec g = spec.f.dx(a, k).transpose() * out.p(t + hk, side);
      if (lambda != 0.0 && spec.L.value) g -= lambda * spec.L.dx(a, k);
      return g;
    };
    Mat vals = Mat::Zero(n, static_cast<Eigen::Index>(ts.size()));
    for (int i = static_cast<int>(ts.size()) - 2; i >= 0; --i) {
      const double a = ts[static_cast<std::size_t>(i)], b = ts[static_cast<std::size_t>(i) + 1];
      Vec inc = Vec::Zero(n);
      if (b <= T - hk + detail::snap_tol(T)) inc = 0.5 * (b - a) * (G(a, Side::Point) + G(b, Side::Left));
      vals.col(i) = vals.col(i + 1) + inc;
    }
    rest -= vals;
    std::vector<double> ext{S - hk};
    ext.insert(ext.end(), ts.begin(), ts.end());
    Mat ev(n, vals.cols() + 1);
    ev << vals.col(0), vals;
    out.components[static_cast<std::size_t>(k)] = Trajectory(std::move(ext), std::move(ev), Interp::Linear);
  }
  out.components[0] = Trajectory(ts, std::move(rest), Interp::Linear);
  return out;
}

SolveResult solve_stacked(const StackedProblem& sp, const SolveOptions& options) {
  const ProblemSpec& spec = sp.original;
  const int r = sp.stackCount, m = spec.m;
  const int M = options.controlIntervals;
  if (M % r != 0) throw InvalidArgument("controlIntervals must be a multiple of the stack count");
  if (spec.C.kind() != EndpointConstraint::Kind::FixedInitial)
    throw Unsupported("stacked solve needs a fixed initial state");
  for (const auto& s : spec.U.sets())
    if (s.kind() != ControlSet::Kind::Box) throw Unsupported("stacked solve needs box control sets");
  const double step = effective_step(spec.T - spec.S, M, options.step);
  const int per = M / r;

  ControlParameterization param;
  param.n = spec.n;
  param.m = m;
  param.uMesh = uniform_grid(spec.S, spec.T, M);
  const std::vector<double> localMesh = uniform_grid(0.0, sp.baseStep, per);

  auto pT_of = [&](const Process& sproc) {
    const EndpointGradient g = sp.stacked.g.gradient(sproc.x(0.0), sproc.x(sp.baseStep), sp.baseStep);
    return Vec(-g.xT.tail(spec.n));
  };
  auto objective = [&](const Vec& theta, bool withGrad) {
    Evaluation ev;
    const Process sproc = stacked_process(sp, param.control(theta), step);
    ev.cost = sproc.cost;
    if (!withGrad) return ev;
    const MultiplierSet q = costate_stacked(sp, sproc, 1.0, pT_of(sproc), step);
    const Mat gs = control_gradient(sp.stacked, sproc, q, localMesh);
    ev.gradient.resize(param.size());
    for (int j = 0; j < r; ++j)
      for (int l = 0; l < per; ++l) ev.gradient.segment((j * per + l) * m, m) = gs.col(l).segment(j * m, m);
    return ev;
  };
  auto project = [&](const Vec& theta) {
    Vec out = theta;
    for (int j = 0; j < M; ++j)
      out.segment(j * m, m) = spec.U.at(param.uMesh[static_cast<std::size_t>(j)]).project(theta.segment(j * m, m));
    return out;
  };
  const Vec uc = spec.initialControl.size() == m ? spec.initialControl : Vec::Zero(m);
  const Trajectory u0(param.uMesh, uc.replicate(1, M + 1), Interp::PiecewiseConstantLeft);
  const DriverResult dr = minimize_projected(objective, project, param.weights(),
                                             param.pack(u0, spec.initialData, spec.x0), options);

  const Trajectory u = param.control(dr.theta);
  const Process sproc = stacked_process(sp, u, step);
  const MultiplierSet q = costate_stacked(sp, sproc, 1.0, pT_of(sproc), step);

  SolveResult res;
  res.process.x = sp.unstack(sproc.x);
  res.process.u = u;
  res.process.d = spec.initialData;
  res.process.T = spec.T;
  res.process.cost = sproc.cost;
  res.multipliers = lift_multipliers(sp, q.p, res.process, 1.0);
  res.iterations = dr.iterations;
  res.gradNorm = dr.gradNorm;
  res.converged = dr.converged;
  res.message = dr.message;
  if (options.audit) {
    AuditOptions ao = options.auditOptions;
    ao.seed = options.seed;
    res.audit = full_audit(spec, res.process, res.multipliers, ao);
  }
  return res;
}

RationalApprox simultaneous_rational_approx(std::span<const double> positives, double eps, long nMax) {
  if (positives.empty()) throw InvalidArgument("simultaneous_rational_approx needs at least one number");
  for (double h : positives)
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("simultaneous_rational_approx needs positive numbers");
  if (!(eps >= 0.0)) throw InvalidArgument("eps must be non-negative");
  if (nMax < 1) throw InvalidArgument("nMax must be >= 1");
  for (long n = 1; n <= nMax; ++n) {
    RationalApprox out;
    out.n = n;
    double worst = 0.0;
    for (double h : positives) {
      const double x = static_cast<double>(n) * h;
      const double e = std::abs(x - std::max(1.0, std::round(x)));
      out.errors.push_back(e);
      worst = std::max(worst, e);
    }
    if (worst <= eps + 1e-12) return out;
  }
  throw NumericalError("no n <= nMax meets the approximation bound");
}

}  // namespace delaypmp
