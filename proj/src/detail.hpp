#pragma once

#include <algorithm>
#include <cmath>

#include "delaypmp/model.hpp"

namespace delaypmp::detail {

inline double snap_tol(double t) { return 1e-10 * std::max(1.0, std::abs(t)); }

inline bool same_time(double a, double b) { return std::abs(a - b) <= snap_tol(std::max(std::abs(a), std::abs(b))); }

/// Control value feeding a delay slot at time tau: u on [S, T], d^u before S.
inline Vec control_slot(const Trajectory& u, const Trajectory& du, double S, double tau, Side side) {
  if (same_time(tau, S)) return side == Side::Left ? du(S, Side::Left) : u(S, Side::Point);
  if (tau > S) return u(std::min(tau, u.end()), side);
  return du(tau, side);
}

/// History value of the state at tau <= S (x(S) = x0 at tau == S unless side == Left).
inline Vec history_state(const Trajectory& dx, const Vec& x0, double S, double tau, Side side) {
  if (same_time(tau, S)) return side == Side::Left ? dx(S, Side::Left) : x0;
  return dx(tau, side);
}

inline void require_finite(const Vec& v, const char* what);

}  // namespace delaypmp::detail

#include "delaypmp/errors.hpp"

namespace delaypmp::detail {

inline void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw NumericalError(std::string(what) + " evaluated to a non-finite value");
}

}  // namespace delaypmp::detail
