#pragma once

#include <optional>
#include <vector>

#include "delaypmp/model.hpp"

namespace delaypmp {

struct SimReport {
  Trajectory trajectory;
  /// L1 defect of the integral equation, midpoint rule per cell.
  double defect = 0.0;
  int picardIterations = 0;
  /// defect * exp((N+1) * int k); +inf when no Lipschitz modulus is known.
  double certifiedBound = 0.0;
  bool converged = true;
  /// Every delay is an integer multiple of the step (no interpolation used).
  bool aligned = false;
  /// Picard only: sup-norm change between consecutive iterates, starting with
  /// |x^1 - seed|.
  std::vector<double> picardChanges;
};

/// Uniform time grid shared by the forward and backward sweeps.
struct StepGrid {
  double a = 0.0;
  double b = 0.0;
  int K = 1;
  double dt = 1.0;
  bool aligned = false;
  std::vector<int> offsets;  // h_k / dt when aligned

  double time(int i) const { return i == K ? b : a + i * dt; }
  std::vector<double> times() const { return uniform_grid(a, b, K); }
};

/// Grid on [a, b] with spacing <= step. Throws InvalidArgument for step <= 0,
/// or when the delays are not multiples of the spacing and the smallest
/// positive delay is shorter than it.
StepGrid make_step_grid(double a, double b, double step, const DelayGrid& delays);

/// Method of steps with classical RK4. Delayed arguments come from stored RK
/// stage values when the grid is aligned with the delays, otherwise from
/// linear interpolation of the computed samples.
SimReport simulate(const ProblemSpec& spec, const Trajectory& u, const InitialData& d, const Vec& x0,
                   double step);

/// Picard iteration x^{j+1}(t) = x0 + int_S^t f(s, {x^j(s - h_k)}, ...) ds on the
/// seed's sample grid. Stops at the first iterate x^j (j >= 1) with
/// sup|x^{j+1} - x^j| <= tol; flags non-convergence after maxIter.
SimReport picard_solve(const ProblemSpec& spec, const Trajectory& u, const InitialData& d, const Vec& x0,
                       const Trajectory& seed, int maxIter, double tol);

/// defect0 * exp((N + 1) * kIntegral).
double filippov_bound(double defect0, double kIntegral, int N);

/// Sum over cells of |x(t_{i+1}) - x(t_i) - dt * f(midpoint)|.
double simulation_defect(const ProblemSpec& spec, const Trajectory& x, const Trajectory& u,
                         const InitialData& d);

/// Integral of the Lipschitz modulus over [a, b]; nullopt if the problem has none.
std::optional<double> lipschitz_integral(const ProblemSpec& spec, double a, double b);

/// Simulate and evaluate the cost.
Process make_process(const ProblemSpec& spec, const Trajectory& u, const InitialData& d, const Vec& x0,
                     double step);

}  // namespace delaypmp
