#include "delaypmp/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "delaypmp/errors.hpp"

namespace delaypmp {

namespace {

double snap_tol(double t) { return 1e-10 * std::max(1.0, std::abs(t)); }

}  // namespace

// ---------------------------------------------------------------- DelayGrid

DelayGrid::DelayGrid(std::vector<double> delays) : delays_(std::move(delays)) {
  if (delays_.empty()) throw InvalidArgument("delay grid must contain h_0 = 0");
  if (delays_.front() != 0.0) throw InvalidArgument("delay grid must start with h_0 = 0");
  for (std::size_t k = 0; k < delays_.size(); ++k) {
    if (!std::isfinite(delays_[k])) throw InvalidArgument("delays must be finite");
    if (k > 0 && !(delays_[k] > delays_[k - 1]))
      throw InvalidArgument("delays must be strictly increasing");
  }
}

// --------------------------------------------------------------- ControlSet

ControlSet ControlSet::box(Vec lo, Vec hi) {
  if (lo.size() != hi.size()) throw InvalidArgument("box bounds differ in dimension");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (lo(i) > hi(i)) throw InvalidArgument("box lower bound exceeds upper bound");
  ControlSet s;
  s.kind_ = Kind::Box;
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  return s;
}

ControlSet ControlSet::finite(std::vector<Vec> points) {
  if (points.empty()) throw InvalidArgument("finite control set is empty");
  const auto dim = points.front().size();
  ControlSet s;
  s.kind_ = Kind::Finite;
  s.lo_ = points.front();
  s.hi_ = points.front();
  for (const auto& p : points) {
    if (p.size() != dim) throw InvalidArgument("finite control set: mixed dimensions");
    s.lo_ = s.lo_.cwiseMin(p);
    s.hi_ = s.hi_.cwiseMax(p);
  }
  s.points_ = std::move(points);
  return s;
}

ControlSet ControlSet::fixed(Vec point) {
  ControlSet s;
  s.kind_ = Kind::Fixed;
  s.lo_ = point;
  s.hi_ = point;
  s.points_ = {std::move(point)};
  return s;
}

bool ControlSet::contains(const Vec& v, double tol) const {
  if (v.size() != lo_.size()) return false;
  switch (kind_) {
    case Kind::Box:
      return ((v - lo_).array() >= -tol).all() && ((hi_ - v).array() >= -tol).all();
    case Kind::Finite:
    case Kind::Fixed:
      return std::any_of(points_.begin(), points_.end(),
                         [&](const Vec& p) { return (p - v).norm() <= tol; });
  }
  return false;
}

Vec ControlSet::project(const Vec& v) const {
  if (v.size() != lo_.size()) throw InvalidArgument("projection: dimension mismatch");
  if (kind_ == Kind::Box) return v.cwiseMax(lo_).cwiseMin(hi_);
  std::size_t best = 0;
  double bestDist = (points_[0] - v).squaredNorm();
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double d = (points_[i] - v).squaredNorm();
    if (d < bestDist) {
      bestDist = d;
      best = i;
    }
  }
  return points_[best];
}

bool ControlSet::bounded() const {
  return lo_.allFinite() && hi_.allFinite();
}

std::vector<Vec> ControlSet::vertices() const {
  if (kind_ != Kind::Box) return points_;
  if (!bounded()) throw Unsupported("vertices of an unbounded box");
  const int m = dim();
  if (m > 16) throw Unsupported("box has too many corners to enumerate");
  std::vector<Vec> out;
  out.reserve(std::size_t{1} << m);
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    Vec v = lo_;
    for (int i = 0; i < m; ++i)
      if (mask & (1u << i)) v(i) = hi_(i);
    out.push_back(std::move(v));
  }
  return out;
}

// -------------------------------------------------------------- SetSchedule

SetSchedule::SetSchedule(std::vector<double> starts, std::vector<ControlSet> sets)
    : starts_(std::move(starts)), sets_(std::move(sets)) {
  if (sets_.empty() || sets_.size() != starts_.size())
    throw InvalidArgument("set schedule: need one start time per set");
  for (std::size_t i = 1; i < starts_.size(); ++i) {
    if (!(starts_[i] > starts_[i - 1])) throw InvalidArgument("set schedule: starts must increase");
    if (sets_[i].dim() != sets_[0].dim()) throw InvalidArgument("set schedule: mixed dimensions");
  }
}

const ControlSet& SetSchedule::at(double t) const {
  auto it = std::upper_bound(starts_.begin(), starts_.end(), t + snap_tol(t));
  const auto i = it == starts_.begin() ? 0 : static_cast<std::size_t>(it - starts_.begin()) - 1;
  return sets_[i];
}

bool SetSchedule::allFixed() const {
  return std::all_of(sets_.begin(), sets_.end(),
                     [](const ControlSet& s) { return s.kind() == ControlSet::Kind::Fixed; });
}

// ------------------------------------------------------- EndpointConstraint

EndpointConstraint EndpointConstraint::free(int n) {
  EndpointConstraint c;
  c.kind_ = Kind::Free;
  c.n_ = n;
  return c;
}

EndpointConstraint EndpointConstraint::fixedInitial(Vec x0) {
  EndpointConstraint c;
  c.kind_ = Kind::FixedInitial;
  c.n_ = static_cast<int>(x0.size());
  c.anchorS_ = std::move(x0);
  return c;
}

EndpointConstraint EndpointConstraint::fixedBoth(Vec x0, Vec xT) {
  if (x0.size() != xT.size()) throw InvalidArgument("fixed endpoints differ in dimension");
  EndpointConstraint c;
  c.kind_ = Kind::FixedBoth;
  c.n_ = static_cast<int>(x0.size());
  c.anchorS_ = std::move(x0);
  c.anchorT_ = std::move(xT);
  return c;
}

EndpointConstraint EndpointConstraint::box(Vec lo, Vec hi) {
  if (lo.size() != hi.size() || lo.size() % 2 != 0)
    throw InvalidArgument("endpoint box bounds must both have length 2n");
  EndpointConstraint c;
  c.kind_ = Kind::Box;
  c.n_ = static_cast<int>(lo.size() / 2);
  c.lo_ = std::move(lo);
  c.hi_ = std::move(hi);
  return c;
}

EndpointConstraint EndpointConstraint::affine(Mat A, Vec b) {
  if (A.rows() != b.size() || A.cols() % 2 != 0)
    throw InvalidArgument("affine endpoint constraint: A must be k x 2n and b of length k");
  EndpointConstraint c;
  c.kind_ = Kind::Affine;
  c.n_ = static_cast<int>(A.cols() / 2);
  c.A_ = std::move(A);
  c.b_ = std::move(b);
  return c;
}

bool EndpointConstraint::contains(const Vec& xS, const Vec& xT, double tol) const {
  if (xS.size() != n_ || xT.size() != n_) return false;
  Vec z(2 * n_);
  z << xS, xT;
  switch (kind_) {
    case Kind::Free:
      return true;
    case Kind::FixedInitial:
      return (xS - anchorS_).lpNorm<Eigen::Infinity>() <= tol * (1.0 + anchorS_.lpNorm<Eigen::Infinity>());
    case Kind::FixedBoth:
      return (xS - anchorS_).lpNorm<Eigen::Infinity>() <= tol * (1.0 + anchorS_.lpNorm<Eigen::Infinity>()) &&
             (xT - anchorT_).lpNorm<Eigen::Infinity>() <= tol * (1.0 + anchorT_.lpNorm<Eigen::Infinity>());
    case Kind::Box:
      return ((z - lo_).array() >= -tol).all() && ((hi_ - z).array() >= -tol).all();
    case Kind::Affine:
      return (A_ * z - b_).lpNorm<Eigen::Infinity>() <= tol * (1.0 + b_.lpNorm<Eigen::Infinity>());
  }
  return false;
}

double EndpointConstraint::normalConeDistance(const Vec& w, const Vec& xS, const Vec& xT,
                                              double tol) const {
  if (w.size() != 2 * n_) throw InvalidArgument("normal cone: vector must have length 2n");
  if (!contains(xS, xT, tol)) throw InvalidArgument("normal cone: endpoint pair is not in C");
  switch (kind_) {
    case Kind::Free:
      return w.norm();
    case Kind::FixedInitial:
      return w.tail(n_).norm();
    case Kind::FixedBoth:
      return 0.0;
    case Kind::Box: {
      Vec z(2 * n_);
      z << xS, xT;
      double sq = 0.0;
      for (int i = 0; i < 2 * n_; ++i) {
        const bool atLo = z(i) <= lo_(i) + tol;
        const bool atHi = z(i) >= hi_(i) - tol;
        double d = 0.0;
        if (atLo && atHi) d = 0.0;
        else if (atLo) d = std::max(w(i), 0.0);
        else if (atHi) d = std::max(-w(i), 0.0);
        else d = std::abs(w(i));
        sq += d * d;
      }
      return std::sqrt(sq);
    }
    case Kind::Affine: {
      // N_C is the row space of A.
      const Mat At = A_.transpose();
      const Vec mu = At.completeOrthogonalDecomposition().solve(w);
      return (At * mu - w).norm();
    }
  }
  return 0.0;
}

// -------------------------------------------------------------- ProblemSpec

void ProblemSpec::validate() const {
  if (n < 1 || m < 1) throw InvalidArgument(name + ": state and control dimensions must be positive");
  if (!(S < T)) throw InvalidArgument(name + ": need S < T");
  if (x0.size() != n) throw InvalidArgument(name + ": x0 has wrong dimension");
  if (!f.value || !L.value || !g.value || !Lambda.value)
    throw InvalidArgument(name + ": f, L, g and Lambda must all be provided");
  if (U.empty() || U.dim() != m) throw InvalidArgument(name + ": U has wrong dimension");
  if (D && D->dim() != n + m) throw InvalidArgument(name + ": D must have dimension n + m");
  if (C.n() != n) throw InvalidArgument(name + ": endpoint constraint has wrong dimension");
  if (initialData.dx.dim() != n || initialData.du.dim() != m)
    throw InvalidArgument(name + ": initial data has wrong dimension");
  const double slack = 1e-12 * std::max(1.0, std::abs(S));
  for (const auto* tr : {&initialData.dx, &initialData.du}) {
    if (tr->start() > S - h() + slack || tr->end() < S - slack)
      throw InvalidArgument(name + ": initial data must cover [S - h, S]");
  }
  if (initialControl.size() != 0 && initialControl.size() != m)
    throw InvalidArgument(name + ": initial control has wrong dimension");
  if (freeTime && usesDelayedControls && delays.N() > 0)
    throw InvalidArgument(name + ": free end-time problems may not have control delays");
}

// ------------------------------------------------------ delayed evaluation

Mat evaluate_delayed(const Trajectory& x, const Trajectory& dx, const DelayGrid& grid, double t,
                     Side side) {
  const double S = x.start();
  const double slack = 1e-12 * std::max({1.0, std::abs(S), std::abs(x.end())});
  if (t < S - slack || t > x.end() + slack)
    throw DomainError("evaluate_delayed: t=" + std::to_string(t) + " outside [S, T]");
  if (dx.start() > S - grid.max() + slack || dx.end() < S - slack)
    throw DomainError("evaluate_delayed: initial data does not cover [S - h, S]");
  Mat out(x.dim(), grid.count());
  for (int k = 0; k < grid.count(); ++k) {
    const double tau = t - grid[k];
    const bool atS = std::abs(tau - S) <= snap_tol(tau);
    if (atS) {
      out.col(k) = side == Side::Left && k > 0 ? dx(S, Side::Left) : x(S);
    } else if (tau > S) {
      out.col(k) = x(tau);
    } else {
      out.col(k) = dx(tau, side);
    }
  }
  return out;
}

DelayedArgs delayed_args(const DelayGrid& grid, const Trajectory& x, const Trajectory& u,
                         const InitialData& d, double t, Side side) {
  DelayedArgs a;
  a.t = t;
  a.side = side;
  a.x = evaluate_delayed(x, d.dx, grid, t, side);
  const double S = x.start();
  a.u.resize(u.dim(), grid.count());
  for (int k = 0; k < grid.count(); ++k) {
    const double tau = t - grid[k];
    const bool atS = std::abs(tau - S) <= snap_tol(tau);
    if (atS) {
      a.u.col(k) = side == Side::Left && k > 0 ? d.du(S, Side::Left) : u(S, Side::Point);
    } else if (tau > S) {
      a.u.col(k) = u(std::min(tau, u.end()), side);
    } else {
      a.u.col(k) = d.du(tau, side);
    }
  }
  return a;
}

// ------------------------------------------------------------------ costs

std::vector<double> quadrature_grid(const ProblemSpec& spec, const Process& proc) {
  const double S = spec.S;
  const double T = proc.T;
  std::vector<std::vector<double>> lists{proc.x.times()};
  for (int k = 0; k < spec.delays.count(); ++k) {
    const double hk = spec.delays[k];
    for (const auto* tr : {&proc.u, &proc.d.dx, &proc.d.du}) {
      std::vector<double> shifted;
      shifted.reserve(tr->times().size());
      for (double t : tr->times()) shifted.push_back(t + hk);
      lists.push_back(std::move(shifted));
    }
  }
  return merged_grid(lists, S, T);
}

double total_cost(const ProblemSpec& spec, const Process& proc) {
  const double S = spec.S;
  double J = spec.g.value(proc.x(S), proc.x(proc.T), proc.T);
  if (!std::isfinite(J)) throw NumericalError("endpoint cost is not finite");

  const double h = spec.h();
  if (h > 0.0) {
    std::vector<std::vector<double>> lists{proc.d.dx.times(), proc.d.du.times()};
    const auto grid = merged_grid(lists, S - h, S);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      const double a = grid[i], b = grid[i + 1];
      const double la = spec.Lambda.value(a, proc.d.dx(a), proc.d.du(a));
      const double lb = spec.Lambda.value(b, proc.d.dx(b, Side::Left), proc.d.du(b, Side::Left));
      acc += 0.5 * (b - a) * (la + lb);
    }
    if (!std::isfinite(acc)) throw NumericalError("initial-data cost is not finite");
    J += acc;
  }

  const auto grid = quadrature_grid(spec, proc);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double a = grid[i], b = grid[i + 1];
    const double la = spec.L.value(delayed_args(spec.delays, proc.x, proc.u, proc.d, a, Side::Point));
    const double lb = spec.L.value(delayed_args(spec.delays, proc.x, proc.u, proc.d, b, Side::Left));
    acc += 0.5 * (b - a) * (la + lb);
  }
  if (!std::isfinite(acc)) throw NumericalError("running cost is not finite");
  return J + acc;
}

InitialData constant_initial_data(const ProblemSpec& spec, const Vec& dx, const Vec& du) {
  const double a = spec.S - spec.h();
  return {Trajectory::constant(a, spec.S, dx, Interp::PiecewiseConstantLeft),
          Trajectory::constant(a, spec.S, du, Interp::PiecewiseConstantLeft)};
}

Trajectory project_onto(const SetSchedule& sets, const Trajectory& v) {
  Mat vals = v.values();
  for (int i = 0; i < v.size(); ++i) vals.col(i) = sets.at(v.time(i)).project(v.sample(i));
  return Trajectory(v.times(), std::move(vals), v.interp());
}

}  // namespace delaypmp
