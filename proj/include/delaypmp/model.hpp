#pragma once

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "delaypmp/trajectory.hpp"

namespace delaypmp {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
  /// Distance from v to the interval (0 inside).
  double distance(double v) const { return v < lo ? lo - v : (v > hi ? v - hi : 0.0); }
};

/// Delays 0 = h_0 < h_1 < ... < h_N.
class DelayGrid {
 public:
  DelayGrid() : delays_{0.0} {}
  explicit DelayGrid(std::vector<double> delays);

  int count() const { return static_cast<int>(delays_.size()); }  // N + 1
  int N() const { return count() - 1; }
  double operator[](int k) const { return delays_[static_cast<std::size_t>(k)]; }
  double max() const { return delays_.back(); }
  const std::vector<double>& values() const { return delays_; }

 private:
  std::vector<double> delays_;
};

/// One of U(t) or D(t) at a fixed time: a finite list, a box, or a single point.
class ControlSet {
 public:
  enum class Kind { Finite, Box, Fixed };

  static ControlSet box(Vec lo, Vec hi);
  static ControlSet finite(std::vector<Vec> points);
  static ControlSet fixed(Vec point);

  Kind kind() const { return kind_; }
  int dim() const { return static_cast<int>(lo_.size()); }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  /// Finite: the listed points (order defines tie-breaking). Fixed: the point.
  const std::vector<Vec>& points() const { return points_; }

  bool contains(const Vec& v, double tol = 1e-9) const;
  /// Nearest member (Euclidean); lowest index wins ties for finite sets.
  Vec project(const Vec& v) const;
  /// Finite list, box corners, or the fixed point. Throws Unsupported for
  /// unbounded boxes or more than 2^16 corners.
  std::vector<Vec> vertices() const;
  bool bounded() const;

 private:
  Kind kind_ = Kind::Fixed;
  Vec lo_, hi_;
  std::vector<Vec> points_;
};

/// Piecewise-constant schedule t -> ControlSet; set i applies from starts[i] on.
class SetSchedule {
 public:
  SetSchedule() = default;
  explicit SetSchedule(ControlSet set) : starts_{-std::numeric_limits<double>::infinity()}, sets_{std::move(set)} {}
  SetSchedule(std::vector<double> starts, std::vector<ControlSet> sets);

  const ControlSet& at(double t) const;
  int dim() const { return sets_.front().dim(); }
  bool empty() const { return sets_.empty(); }
  const std::vector<double>& starts() const { return starts_; }
  const std::vector<ControlSet>& sets() const { return sets_; }
  /// True when every set in the schedule is a single point.
  bool allFixed() const;

 private:
  std::vector<double> starts_;
  std::vector<ControlSet> sets_;
};

/// Endpoint constraint C on (x(S), x(T)).
class EndpointConstraint {
 public:
  enum class Kind { Free, FixedInitial, FixedBoth, Box, Affine };

  static EndpointConstraint free(int n);
  static EndpointConstraint fixedInitial(Vec x0);
  static EndpointConstraint fixedBoth(Vec x0, Vec xT);
  /// Bounds on the stacked vector (x(S), x(T)); equal bounds pin a coordinate.
  static EndpointConstraint box(Vec lo, Vec hi);
  /// A (x(S), x(T)) = b.
  static EndpointConstraint affine(Mat A, Vec b);

  Kind kind() const { return kind_; }
  int n() const { return n_; }
  const Vec& anchorS() const { return anchorS_; }
  const Vec& anchorT() const { return anchorT_; }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  const Mat& A() const { return A_; }
  const Vec& b() const { return b_; }

  bool contains(const Vec& xS, const Vec& xT, double tol = 1e-6) const;
  /// Distance from w (length 2n) to the normal cone N_C(xS, xT). Throws
  /// InvalidArgument if the point is not in C within tol.
  double normalConeDistance(const Vec& w, const Vec& xS, const Vec& xT, double tol = 1e-6) const;

 private:
  Kind kind_ = Kind::Free;
  int n_ = 0;
  Vec anchorS_, anchorT_, lo_, hi_;
  Mat A_;
  Vec b_;
};

/// Arguments of f and L at time t: column k of `x` is the value in the k-th
/// delay slot, with initial data substituted where t - h_k < S.
struct DelayedArgs {
  double t = 0.0;
  Side side = Side::Point;
  Mat x;  // n x (N+1)
  Mat u;  // m x (N+1)
};

struct Dynamics {
  std::function<Vec(const DelayedArgs&)> value;
  std::function<Mat(const DelayedArgs&, int)> dx;  // n x n Jacobian w.r.t. slot k
  std::function<Mat(const DelayedArgs&, int)> du;  // n x m Jacobian w.r.t. slot k
};

struct RunningCost {
  std::function<double(const DelayedArgs&)> value;
  std::function<Vec(const DelayedArgs&, int)> dx;
  std::function<Vec(const DelayedArgs&, int)> du;
};

struct EndpointGradient {
  Vec xS, xT;
  double T = 0.0;
};

/// g(x(S), x(T), T); fixed end-time problems ignore the last argument.
struct EndpointCost {
  std::function<double(const Vec&, const Vec&, double)> value;
  std::function<EndpointGradient(const Vec&, const Vec&, double)> gradient;
};

/// Lambda(t, d^x, d^u) on the delay interval. The gradient is optional.
struct InitialCost {
  std::function<double(double, const Vec&, const Vec&)> value;
  std::function<std::pair<Vec, Vec>(double, const Vec&, const Vec&)> gradient;
};

/// Past history d = (d^x, d^u) on [S - h, S].
struct InitialData {
  Trajectory dx;
  Trajectory du;
};

struct ProblemSpec {
  std::string name;
  double S = 0.0;
  double T = 1.0;  // for free end-time problems: the current/initial guess
  bool freeTime = false;
  Interval timeBounds{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  std::optional<Interval> timeBracket;  // search bracket for the end time
  DelayGrid delays;
  int n = 1;
  int m = 1;
  Vec x0;
  Dynamics f;
  RunningCost L;
  EndpointCost g;
  InitialCost Lambda;
  SetSchedule U;
  std::optional<SetSchedule> D;  // absent: the initial data is prescribed
  EndpointConstraint C;
  /// k(t) with f, L Lipschitz in the stacked state slots; empty when unknown.
  std::function<double(double)> lipschitz;
  /// True if f or L reads u(t - h_k) for some k >= 1.
  bool usesDelayedControls = true;
  InitialData initialData;
  Vec initialControl;  // constant control used by `simulate` and as a solver start
  std::map<std::string, double> tolerances;

  double h() const { return delays.max(); }
  /// Throws InvalidArgument on inconsistent dimensions or interval.
  void validate() const;
};

struct Process {
  Trajectory x;  // on [S, T]
  Trajectory u;  // on [S, T], piecewise constant
  InitialData d;
  double T = 0.0;
  double cost = 0.0;
};

/// Stacked {x(t - h_k)} as columns, using d^x where t - h_k < S. At
/// t - h_k == S the value x(S) is used unless side == Left.
Mat evaluate_delayed(const Trajectory& x, const Trajectory& dx, const DelayGrid& grid, double t,
                     Side side = Side::Point);

/// Full argument set for f and L at time t in [S, T].
DelayedArgs delayed_args(const DelayGrid& grid, const Trajectory& x, const Trajectory& u,
                         const InitialData& d, double t, Side side = Side::Point);

/// Times at which the integrand of the running cost may jump: the x samples
/// plus every control / initial-data breakpoint shifted by each delay.
std::vector<double> quadrature_grid(const ProblemSpec& spec, const Process& proc);

/// g + integral of Lambda over [S-h, S] + integral of L over [S, T] by the
/// composite trapezoid rule with one-sided limits at cell ends.
double total_cost(const ProblemSpec& spec, const Process& proc);

/// Constant initial data on [S - h, S].
InitialData constant_initial_data(const ProblemSpec& spec, const Vec& dx, const Vec& du);

/// Nearest point of U(t) or D(t) sample by sample.
Trajectory project_onto(const SetSchedule& sets, const Trajectory& v);

}  // namespace delaypmp
