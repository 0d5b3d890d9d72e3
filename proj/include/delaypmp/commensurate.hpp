#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "delaypmp/costate.hpp"
#include "delaypmp/ddesim.hpp"
#include "delaypmp/model.hpp"
#include "delaypmp/solver.hpp"

namespace delaypmp {

/// Largest h > 0 with every positive delay and the horizon an integer
/// multiple of h (relative tolerance 1e-12, denominators up to 1e6).
std::optional<double> check_commensurate(const DelayGrid& grid, double horizon);

/// Delay-free problem on [0, h] with y_j(s) = x(S + j h + s), j < r. The
/// stacked endpoint constraint carries the linkage y_{j+1}(0) = y_j(h); its
/// cost is g(y_0(0), y_{r-1}(h)) plus the (fixed) integral of Lambda.
struct StackedProblem {
  ProblemSpec original;
  ProblemSpec stacked;
  double baseStep = 0.0;
  int stackCount = 1;
  std::vector<int> multiples;  // h_k / baseStep
  double initialCost = 0.0;

  double globalTime(int j, double s) const { return original.S + j * baseStep + s; }
  /// [S, T] trajectory -> [0, h] trajectory of dimension r * dim.
  Trajectory stack(const Trajectory& x) const;
  /// Inverse of stack on sample points.
  Trajectory unstack(const Trajectory& y) const;
};

/// Throws InvalidArgument for free end-time or non-commensurate input.
StackedProblem reduce(const ProblemSpec& spec);

/// Forward sweeps of the stacked system for an original control u on [S, T];
/// r sweeps settle the linkage y_{j+1}(0) = y_j(h).
SimReport simulate_stacked(const StackedProblem& sp, const Trajectory& u, double step);

/// Stacked process (x = y, u = stacked u) with its cost.
Process stacked_process(const StackedProblem& sp, const Trajectory& u, double step);

/// Backward sweeps of the delay-free adjoint with q_{r-1}(h) = pT and the
/// linkage multipliers q_j(h) = q_{j+1}(0).
MultiplierSet costate_stacked(const StackedProblem& sp, const Process& stackedProc, double lambda, const Vec& pT,
                              double step);

/// p(S + j h + s) = q_j(s); components p_k (k >= 1) by trapezoid quadrature of
/// their defining equation along the original process, p_0 = p - sum.
MultiplierSet lift_multipliers(const StackedProblem& sp, const Trajectory& q, const Process& original,
                               double lambda);

/// Projected-gradient solve through the stacked problem, reported in the
/// original variables. Needs a fixed initial state, fixed initial data and
/// box control sets; controlIntervals must be a multiple of r.
SolveResult solve_stacked(const StackedProblem& sp, const SolveOptions& options);

struct RationalApprox {
  long n = 0;
  std::vector<double> errors;  // min over m >= 1 of |n h_k - m|
};

/// Smallest n <= nMax with max_k min_{m >= 1} |n h_k - m| <= eps (+1e-12).
/// Throws NumericalError when there is none.
RationalApprox simultaneous_rational_approx(std::span<const double> positives, double eps, long nMax);

}  // namespace delaypmp
