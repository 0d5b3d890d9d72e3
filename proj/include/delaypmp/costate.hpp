#pragma once

#include <optional>
#include <span>
#include <vector>

#include "delaypmp/model.hpp"

namespace delaypmp {

/// (lambda, p_0..p_N, xi). Component k >= 1 lives on [S - h_k, T], vanishes on
/// [T - h_k, T] and is constant on [S - h_k, S]; p = sum of components on [S, T].
struct MultiplierSet {
  double lambda = 1.0;
  std::vector<Trajectory> components;
  Trajectory p;
  std::optional<double> xi;

  double supP() const { return p.empty() ? 0.0 : p.supNorm(); }
};

/// Backward RK4 for the advance adjoint -p'(t) = sum_k chi_[S, T - h_k](t) G_k(t + h_k)
/// with p(T) = pT, where G_k = (d_{x_k} f)^T p - lambda d_{x_k} L. Uses the
/// grid of `simulate` so stage values line up with the forward sweep.
MultiplierSet costate_solve(const ProblemSpec& spec, const Process& proc, double lambda, const Vec& pT,
                            double step);

/// Right-hand side sum_k chi_k(t) G_k(t + h_k) of -p' for a given p.
Vec adjoint_rhs(const ProblemSpec& spec, const Process& proc, const Trajectory& p, double lambda, double t,
                Side side);

/// Sum over cells of the p grid of |p(t_i) - p(t_{i+1}) - Simpson(adjoint_rhs)|.
double adjoint_defect(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult);

/// Distance of (p(S) - lambda g_S, -p(T) - lambda g_T) to N_C(x(S), x(T)).
double transversality_fixed(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult);

/// Nested [min, max] of the samples in [c - e, c + e] for each e of the
/// (decreasing) ladder. Each rung is intersected with the previous one.
std::vector<Interval> essential_value_ladder(std::span<const double> times, std::span<const double> values,
                                             double center, std::span<const double> ladder);
/// Last rung of essential_value_ladder.
Interval essential_value(std::span<const double> times, std::span<const double> values, double center,
                         std::span<const double> ladder);

struct FreeTimeCheck {
  /// Distance of (p(S), -p(T), xi) to lambda grad g + N_{C x time bounds},
  /// minimised over xi in the essential-value interval.
  double residual = 0.0;
  /// |lambda dg/dT - xi| minimised over the interval (unconstrained end time).
  double twoSidedResidual = 0.0;
  Interval xiInterval;
  double xi = 0.0;
};

/// Free end-time transversality. Samples t -> max_{u in U(t)} (p(T) f - lambda L)
/// with the delayed states frozen at x(T - h_k) on a window around T and takes
/// its essential values. Requires T - S > h and window < T - S - h.
FreeTimeCheck transversality_free(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult,
                                  double window, std::uint64_t seed = 0);

/// Scale (lambda, p, xi) so that lambda + sup|p| = 1. Throws NumericalError
/// for the zero multiplier.
MultiplierSet normalize(const MultiplierSet& mult);

}  // namespace delaypmp
