#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "delaypmp/costate.hpp"
#include "delaypmp/model.hpp"

namespace delaypmp {

enum class Exec { Serial, Parallel };

/// H(t, u, d) = sum_k chi_[S,T](t + h_k) (p(t + h_k) f - lambda L)(t + h_k, ...)
/// with slot k replaced by u (t >= S) or by dval = (d^x, d^u) (t < S); for
/// t < S the term -lambda Lambda(t, dval) is added.
double hamiltonian(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult, double t, const Vec& u,
                   const Vec& dval, Side side = Side::Point);

struct PointwiseResult {
  double residual = 0.0;
  bool approximate = false;
  std::vector<std::pair<double, double>> perTime;  // (t, gap) for every grid time
};

/// max over grid times of max_{u, d} H(t, u, d) - H(t, u(t), d(t)). Times before
/// S are only scored when D is free.
PointwiseResult pointwise_max_residual(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult,
                                       const std::vector<double>& grid, Exec exec = Exec::Parallel,
                                       std::uint64_t seed = 0);

/// I(u, d) - I(u_bar, d_bar) with I = int_[S-h, T] (p f - lambda (L + Lambda)) along
/// the reference state. Positive values violate the integral Weierstrass condition.
double integral_weierstrass_residual(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult,
                                     const Trajectory& candidateU, const InitialData& candidateD);

struct Candidate {
  Trajectory u;
  InitialData d;
};

/// Default battery: constant vertex swaps of U (and of D when free) plus
/// `randomCount` seeded bang-bang selectors.
std::vector<Candidate> candidate_battery(const ProblemSpec& spec, const Process& proc, std::uint64_t seed,
                                         int randomCount = 16);

struct AuditOptions {
  std::uint64_t seed = 0;
  int randomCandidates = 16;
  std::vector<Candidate> extraCandidates;
  Exec exec = Exec::Parallel;
  /// Times for the pointwise check; empty means the merged quadrature grid.
  std::vector<double> grid;
  /// Window for the free end-time check; <= 0 picks min(0.05 (T-S), (T-S-h)/2).
  double freeTimeWindow = 0.0;
};

struct AuditReport {
  double pointwiseResidual = 0.0;
  double integralResidual = 0.0;
  double adjointDefect = 0.0;
  double transversalityResidual = 0.0;
  double nontrivialityMargin = 0.0;
  std::optional<double> freeTimeResidual;
  std::vector<std::pair<double, double>> perTimeWorst;
  bool approximateMax = false;
  std::optional<Interval> xiInterval;
  std::optional<double> twoSidedResidual;
};

AuditReport full_audit(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult,
                       const AuditOptions& options = {});

/// Residual thresholds default to 1e-4; nontrivialityMargin must exceed its
/// entry (default 0).
bool audit_passes(const AuditReport& report, const std::map<std::string, double>& tolerances);

}  // namespace delaypmp
