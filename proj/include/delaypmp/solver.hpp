#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "delaypmp/costate.hpp"
#include "delaypmp/model.hpp"
#include "delaypmp/pmpcheck.hpp"

namespace delaypmp {

struct StepRule {
  double initial = 1.0;
  double shrink = 0.5;
  double sufficientDecrease = 1e-4;
  int maxBacktracks = 40;
};

struct TimeSearch {
  std::optional<Interval> bracket;
  double tol = 1e-4;
};

struct SolveOptions {
  int controlIntervals = 100;   // M
  int dataIntervals = 0;        // mesh on [S - h, S]; 0 picks max(1, round(M h / (T - S)))
  double step = 1e-2;           // simulation step, refined so the mesh lies on the grid
  int maxOuterIter = 500;
  double gradTol = 1e-8;
  StepRule stepRule;
  TimeSearch timeSearch;
  std::uint64_t seed = 0;
  bool audit = true;
  AuditOptions auditOptions;
};

/// Piecewise-constant parameters: u on a uniform mesh of [S, T], optionally
/// (d^x, d^u) on a mesh of [S - h, S] and a free initial state, packed in
/// that order.
struct ControlParameterization {
  std::vector<double> uMesh;
  std::vector<double> dMesh;  // empty when the initial data is fixed
  bool freeInitialState = false;
  int n = 1;
  int m = 1;

  int uCount() const { return static_cast<int>(uMesh.size()) - 1; }
  int dCount() const { return dMesh.empty() ? 0 : static_cast<int>(dMesh.size()) - 1; }
  int size() const { return m * uCount() + (n + m) * dCount() + (freeInitialState ? n : 0); }

  Trajectory control(const Vec& theta) const;
  InitialData data(const Vec& theta, const InitialData& fallback) const;
  Vec initialState(const Vec& theta, const Vec& fallback) const;
  Vec pack(const Trajectory& u, const InitialData& d, const Vec& x0) const;
  /// Interval lengths per coordinate (1 for the initial state).
  Vec weights() const;
};

struct Evaluation {
  double cost = 0.0;
  Vec gradient;  // dJ/dtheta (not divided by the weights)
};

struct DriverResult {
  Vec theta;
  double cost = 0.0;
  int iterations = 0;
  double gradNorm = 0.0;
  bool converged = false;
  std::string message;
};

/// Monotone projected gradient with a Barzilai-Borwein first trial step and
/// Armijo backtracking in the weighted (L2) metric. Stops when
/// sup|theta - P(theta - g/w)| <= gradTol.
DriverResult minimize_projected(const std::function<Evaluation(const Vec&, bool)>& objective,
                                const std::function<Vec(const Vec&)>& project, const Vec& weights, Vec theta,
                                const SolveOptions& options);

/// g(t) = -sum_k chi_[S,T](t + h_k) d_{u_k}(p f - lambda L)(t + h_k), sampled at
/// the quadrature nodes (piecewise constant).
Trajectory reduced_gradient(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult);

/// Integral of the reduced gradient over each mesh interval (m x M).
Mat control_gradient(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult,
                     const std::vector<double>& mesh);

/// Integral over each interval of [S - h, S] of
/// lambda grad Lambda - sum_{k>=1} chi (d_{x_k}, d_{u_k})(p f - lambda L)(s + h_k) ((n+m) x Md).
Mat initial_data_gradient(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult,
                          const std::vector<double>& mesh);

struct TimeProbe {
  double T = 0.0;
  double cost = 0.0;
  double eq6Residual = 0.0;
};

struct SolveResult {
  Process process;
  MultiplierSet multipliers;  // lambda = 1, not normalized
  std::optional<AuditReport> audit;
  int iterations = 0;
  double gradNorm = 0.0;
  bool converged = false;
  std::string message;
  std::vector<TimeProbe> probes;
};

/// Simulation step actually used: the largest step <= options.step with the
/// control mesh on the grid.
double effective_step(double span, int intervals, double step);

SolveResult solve_fixed_time(const ProblemSpec& spec, const SolveOptions& options);
SolveResult solve_free_time(const ProblemSpec& spec, const SolveOptions& options);
/// Dispatches on spec.freeTime.
SolveResult solve(const ProblemSpec& spec, const SolveOptions& options);

/// Costate with lambda = 1 and p(T) = -grad_{x_T} g.
MultiplierSet normal_costate(const ProblemSpec& spec, const Process& proc, double step);

}  // namespace delaypmp
