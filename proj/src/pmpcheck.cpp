#include "delaypmp/pmpcheck.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>

#include "delaypmp/errors.hpp"
#include "delaypmp/maximize.hpp"
#include "detail.hpp"

namespace delaypmp {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t i) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (i + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Runs body(i) for i in [0, count), in parallel when asked; the first
/// exception thrown is rethrown after the loop.
template <class Body>
void for_each_index(int count, Exec exec, Body&& body) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel)
  for (int i = 0; i < count; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(delaypmp_audit_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

Vec stack_data(const InitialData& d, double t, Side side) {
  Vec v(d.dx.dim() + d.du.dim());
  v << d.dx(t, side), d.du(t, side);
  return v;
}

bool data_free(const ProblemSpec& spec) { return spec.D && !spec.D->allFixed() && spec.h() > 0.0; }

double running_integrand(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult,
                         const Trajectory& u, const InitialData& d, double t, Side side) {
  const DelayedArgs args = delayed_args(spec.delays, proc.x, u, d, t, side);
  double v = mult.p(t, side).dot(spec.f.value(args));
  if (mult.lambda != 0.0 && spec.L.value) v -= mult.lambda * spec.L.value(args);
  return v;
}

double initial_integrand(const ProblemSpec& spec, const MultiplierSet& mult, const InitialData& d, double t,
                         Side side) {
  if (mult.lambda == 0.0 || !spec.Lambda.value) return 0.0;
  return -mult.lambda * spec.Lambda.value(t, d.dx(t, side), d.du(t, side));
}

std::vector<double> shifted(const std::vector<double>& ts, double by) {
  std::vector<double> out(ts.size());
  std::transform(ts.begin(), ts.end(), out.begin(), [by](double t) { return t + by; });
  return out;
}

}  // namespace

double hamiltonian(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult, double t, const Vec& u,
                   const Vec& dval, Side side) {
  const double S = spec.S, T = proc.T;
  const double slack = detail::snap_tol(std::max(std::abs(S), std::abs(T)));
  if (t < S - spec.h() - slack || t > T + slack) throw DomainError("hamiltonian: t outside [S - h, T]");
  const bool before = detail::same_time(t, S) ? side == Side::Left : t < S;
  if (!before && u.size() != spec.m) throw InvalidArgument("hamiltonian: control has wrong dimension");
  if (before && dval.size() != spec.n + spec.m) throw InvalidArgument("hamiltonian: initial datum has wrong dimension");

  double H = 0.0;
  for (int k = 0; k < spec.delays.count(); ++k) {
    const double tau = t + spec.delays[k];
    if (tau < S - slack || tau > T + slack || (before && k == 0)) continue;
    const double at = std::clamp(tau, S, T);
    DelayedArgs args = delayed_args(spec.delays, proc.x, proc.u, proc.d, at, side);
    if (before) {
      args.x.col(k) = dval.head(spec.n);
      args.u.col(k) = dval.tail(spec.m);
    } else {
      args.u.col(k) = u;
    }
    double term = mult.p(at, side).dot(spec.f.value(args));
    if (mult.lambda != 0.0 && spec.L.value) term -= mult.lambda * spec.L.value(args);
    H += term;
  }
  if (before && mult.lambda != 0.0 && spec.Lambda.value)
    H -= mult.lambda * spec.Lambda.value(t, dval.head(spec.n), dval.tail(spec.m));
  if (!std::isfinite(H)) throw NumericalError("hamiltonian is not finite");
  return H;
}

PointwiseResult pointwise_max_residual(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult,
                                       const std::vector<double>& grid, Exec exec, std::uint64_t seed) {
  const int count = static_cast<int>(grid.size());
  std::vector<double> gaps(grid.size(), 0.0);
  std::vector<char> approx(grid.size(), 0);
  const bool dFree = data_free(spec);
  const Vec none;

  for_each_index(count, exec, [&](int i) {
    const double t = grid[static_cast<std::size_t>(i)];
    const std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(i));
    if (t < spec.S && !detail::same_time(t, spec.S)) {
      if (!dFree) return;
      const Vec bar = stack_data(proc.d, t, Side::Point);
      const double Hbar = hamiltonian(spec, proc, mult, t, none, bar);
      const SetMaximum best = maximize_over(
          spec.D->at(t), [&](const Vec& v) { return hamiltonian(spec, proc, mult, t, none, v); }, s, &bar);
      gaps[static_cast<std::size_t>(i)] = std::max(best.value - Hbar, 0.0);
      approx[static_cast<std::size_t>(i)] = best.approximate;
      return;
    }
    const Vec bar = proc.u(std::min(t, proc.u.end()), Side::Point);
    const double Hbar = hamiltonian(spec, proc, mult, t, bar, none);
    const SetMaximum best = maximize_over(
        spec.U.at(t), [&](const Vec& v) { return hamiltonian(spec, proc, mult, t, v, none); }, s, &bar);
    gaps[static_cast<std::size_t>(i)] = std::max(best.value - Hbar, 0.0);
    approx[static_cast<std::size_t>(i)] = best.approximate;
  });

  PointwiseResult out;
  out.perTime.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.residual = std::max(out.residual, gaps[i]);
    out.approximate = out.approximate || approx[i];
    out.perTime.emplace_back(grid[i], gaps[i]);
  }
  return out;
}

double integral_weierstrass_residual(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult,
                                     const Trajectory& candidateU, const InitialData& candidateD) {
  if (candidateU.dim() != spec.m || candidateD.dx.dim() != spec.n || candidateD.du.dim() != spec.m)
    throw InvalidArgument("candidate has wrong dimension");
  const double S = spec.S, T = proc.T, h = spec.h();

  std::vector<std::vector<double>> lists{proc.x.times()};
  for (int k = 0; k < spec.delays.count(); ++k) {
    const double hk = spec.delays[k];
    for (const auto* tr : {&proc.u, &proc.d.dx, &proc.d.du, &candidateU, &candidateD.dx, &candidateD.du})
      lists.push_back(shifted(tr->times(), hk));
  }
  const auto grid = merged_grid(lists, S, T);
  double diff = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double a = grid[i], b = grid[i + 1];
    const double ca = running_integrand(spec, proc, mult, candidateU, candidateD, a, Side::Point);
    const double cb = running_integrand(spec, proc, mult, candidateU, candidateD, b, Side::Left);
    const double ra = running_integrand(spec, proc, mult, proc.u, proc.d, a, Side::Point);
    const double rb = running_integrand(spec, proc, mult, proc.u, proc.d, b, Side::Left);
    diff += 0.5 * (b - a) * ((ca + cb) - (ra + rb));
  }
  if (h > 0.0) {
    std::vector<std::vector<double>> dl{proc.d.dx.times(), proc.d.du.times(), candidateD.dx.times(),
                                        candidateD.du.times()};
    const auto dgrid = merged_grid(dl, S - h, S);
    for (std::size_t i = 0; i + 1 < dgrid.size(); ++i) {
      const double a = dgrid[i], b = dgrid[i + 1];
      const double c = initial_integrand(spec, mult, candidateD, a, Side::Point) +
                       initial_integrand(spec, mult, candidateD, b, Side::Left);
      const double r = initial_integrand(spec, mult, proc.d, a, Side::Point) +
                       initial_integrand(spec, mult, proc.d, b, Side::Left);
      diff += 0.5 * (b - a) * (c - r);
    }
  }
  if (!std::isfinite(diff)) throw NumericalError("candidate integrand is not integrable (non-finite quadrature)");
  return diff;
}

std::vector<Candidate> candidate_battery(const ProblemSpec& spec, const Process& proc, std::uint64_t seed,
                                         int randomCount) {
  std::vector<Candidate> out;
  const auto& ts = proc.u.times();
  auto vertices_at = [&](double t) -> std::vector<Vec> {
    try {
      return spec.U.at(t).vertices();
    } catch (const Unsupported&) {
      return {};
    }
  };
  const auto first = vertices_at(spec.S);
  if (first.empty()) return out;

  auto build_u = [&](const std::function<std::size_t(int)>& pick) {
    Mat vals(spec.m, static_cast<Eigen::Index>(ts.size()));
    for (std::size_t j = 0; j < ts.size(); ++j) {
      const auto vs = vertices_at(ts[j]);
      if (vs.empty()) return Trajectory();
      vals.col(static_cast<Eigen::Index>(j)) = vs[std::min(pick(static_cast<int>(j)), vs.size() - 1)];
    }
    return Trajectory(ts, std::move(vals), Interp::PiecewiseConstantLeft);
  };

  for (std::size_t v = 0; v < first.size(); ++v) {
    Trajectory u = build_u([v](int) { return v; });
    if (!u.empty()) out.push_back({std::move(u), proc.d});
  }
  std::vector<Vec> dverts;
  if (data_free(spec)) {
    try {
      dverts = spec.D->at(spec.S - spec.h()).vertices();
    } catch (const Unsupported&) {
    }
    const double a = spec.S - spec.h();
    for (const auto& v : dverts)
      out.push_back({proc.u, {Trajectory::constant(a, spec.S, v.head(spec.n), Interp::PiecewiseConstantLeft),
                              Trajectory::constant(a, spec.S, v.tail(spec.m), Interp::PiecewiseConstantLeft)}});
  }

  std::mt19937_64 rng(seed);
  constexpr int pieces = 8;
  std::uniform_int_distribution<std::size_t> pickU(0, first.size() - 1);
  std::uniform_int_distribution<int> cut(1, std::max(1, static_cast<int>(ts.size()) - 2));
  for (int c = 0; c < randomCount; ++c) {
    std::vector<int> cuts(pieces - 1);
    for (auto& x : cuts) x = cut(rng);
    std::sort(cuts.begin(), cuts.end());
    std::vector<std::size_t> choice(pieces);
    for (auto& x : choice) x = pickU(rng);
    Trajectory u = build_u([&](int j) {
      const auto piece = std::upper_bound(cuts.begin(), cuts.end(), j) - cuts.begin();
      return choice[static_cast<std::size_t>(piece)];
    });
    InitialData d = proc.d;
    if (!dverts.empty() && c % 2 == 1) {
      std::uniform_int_distribution<std::size_t> pickD(0, dverts.size() - 1);
      const Vec v = dverts[pickD(rng)];
      const double a = spec.S - spec.h();
      d = {Trajectory::constant(a, spec.S, v.head(spec.n), Interp::PiecewiseConstantLeft),
           Trajectory::constant(a, spec.S, v.tail(spec.m), Interp::PiecewiseConstantLeft)};
    }
    if (!u.empty()) out.push_back({std::move(u), std::move(d)});
  }
  return out;
}

AuditReport full_audit(const ProblemSpec& spec, const Process& proc, const MultiplierSet& mult,
                       const AuditOptions& options) {
  if (mult.p.empty() || mult.p.dim() != spec.n) throw InvalidArgument("multiplier has wrong dimension");
  if (proc.x.dim() != spec.n || proc.u.dim() != spec.m) throw InvalidArgument("process has wrong dimension");
  AuditReport rep;

  std::vector<double> grid = options.grid;
  if (grid.empty()) {
    grid = quadrature_grid(spec, proc);
    if (data_free(spec)) {
      std::vector<std::vector<double>> lists{proc.d.dx.times(), proc.d.du.times()};
      auto before = merged_grid(lists, spec.S - spec.h(), spec.S);
      before.pop_back();
      grid.insert(grid.begin(), before.begin(), before.end());
    }
  }
  const PointwiseResult pw = pointwise_max_residual(spec, proc, mult, grid, options.exec, options.seed);
  rep.pointwiseResidual = pw.residual;
  rep.approximateMax = pw.approximate;
  auto worst = pw.perTime;
  std::stable_sort(worst.begin(), worst.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (worst.size() > 10) worst.resize(10);
  rep.perTimeWorst = std::move(worst);

  std::vector<Candidate> battery = candidate_battery(spec, proc, options.seed, options.randomCandidates);
  battery.insert(battery.end(), options.extraCandidates.begin(), options.extraCandidates.end());
  std::vector<double> scores(battery.size(), 0.0);
  for_each_index(static_cast<int>(battery.size()), options.exec, [&](int i) {
    const auto& c = battery[static_cast<std::size_t>(i)];
    scores[static_cast<std::size_t>(i)] = integral_weierstrass_residual(spec, proc, mult, c.u, c.d);
  });
  for (double s : scores) rep.integralResidual = std::max(rep.integralResidual, s);

  rep.adjointDefect = adjoint_defect(spec, proc, mult);
  rep.transversalityResidual = transversality_fixed(spec, proc, mult);
  rep.nontrivialityMargin = mult.lambda + mult.supP();

  if (spec.freeTime) {
    const double span = proc.T - spec.S;
    const double window =
        options.freeTimeWindow > 0.0 ? options.freeTimeWindow : std::min(0.05 * span, 0.5 * (span - spec.h()));
    const FreeTimeCheck ft = transversality_free(spec, proc, mult, window, options.seed);
    rep.freeTimeResidual = ft.residual;
    rep.xiInterval = ft.xiInterval;
    rep.twoSidedResidual = ft.twoSidedResidual;
  }
  return rep;
}

bool audit_passes(const AuditReport& report, const std::map<std::string, double>& tolerances) {
  auto tol = [&](const char* key, double fallback) {
    const auto it = tolerances.find(key);
    return it == tolerances.end() ? fallback : it->second;
  };
  bool ok = report.pointwiseResidual <= tol("pointwiseResidual", 1e-4) &&
            report.integralResidual <= tol("integralResidual", 1e-4) &&
            report.adjointDefect <= tol("adjointDefect", 1e-4) &&
            report.transversalityResidual <= tol("transversalityResidual", 1e-4) &&
            report.nontrivialityMargin > tol("nontrivialityMargin", 0.0);
  if (report.freeTimeResidual) ok = ok && *report.freeTimeResidual <= tol("freeTimeResidual", 1e-4);
  return ok;
}

}  // namespace delaypmp
