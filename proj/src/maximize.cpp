#include "delaypmp/maximize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "delaypmp/errors.hpp"

namespace delaypmp {

namespace {

constexpr int kRandomStarts = 8;
constexpr int kMaxAscentIter = 60;

Vec fd_gradient(const std::function<double(const Vec&)>& fn, const Vec& u, const ControlSet& box) {
  Vec g(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(u(i)));
    Vec up = u, dn = u;
    up(i) += h;
    dn(i) -= h;
    // One-sided differences at active bounds keep the evaluation inside the box.
    up(i) = std::min(up(i), box.hi()(i));
    dn(i) = std::max(dn(i), box.lo()(i));
    const double span = up(i) - dn(i);
    g(i) = span > 0.0 ? (fn(up) - fn(dn)) / span : 0.0;
  }
  return g;
}

/// Projected ascent with a step from the curvature along the gradient.
void ascend(const ControlSet& box, const std::function<double(const Vec&)>& fn, Vec u, double fu,
            SetMaximum& best) {
  for (int it = 0; it < kMaxAscentIter; ++it) {
    const Vec g = fd_gradient(fn, u, box);
    const double gg = g.squaredNorm();
    if (!(gg > 0.0) || !std::isfinite(gg)) break;
    // Second difference along g with a probe length independent of the scale of fn.
    const double probe = 1e-4 * std::max(1.0, u.norm()) / std::sqrt(gg);
    const double fp = fn(u + probe * g), fm = fn(u - probe * g);
    const double curv = (fp - 2.0 * fu + fm) / (probe * probe);  // d^2/dalpha^2 along g
    double alpha;
    if (curv < 0.0) {
      alpha = gg / -curv;
    } else {
      const Vec width = (box.hi() - box.lo()).cwiseMin(Vec::Constant(u.size(), 1e6));
      alpha = std::max(width.norm(), 1.0) / std::sqrt(gg);
    }
    bool moved = false;
    for (int halving = 0; halving < 50; ++halving, alpha *= 0.5) {
      const Vec cand = box.project(u + alpha * g);
      const double step = (cand - u).norm();
      if (step <= 1e-14 * std::max(1.0, u.norm())) break;
      const double fc = fn(cand);
      if (fc > fu + 1e-4 * g.dot(cand - u)) {
        u = cand;
        fu = fc;
        moved = true;
        break;
      }
    }
    if (fu > best.value) {
      best.value = fu;
      best.argmax = u;
    }
    if (!moved) break;
  }
}

}  // namespace

SetMaximum maximize_over(const ControlSet& set, const std::function<double(const Vec&)>& fn,
                         std::uint64_t seed, const Vec* hint) {
  SetMaximum best;
  if (set.kind() != ControlSet::Kind::Box) {
    const auto& pts = set.points();
    best.value = fn(pts[0]);
    best.argmax = pts[0];
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double v = fn(pts[i]);
      if (v > best.value) {
        best.value = v;
        best.argmax = pts[i];
      }
    }
    return best;
  }

  best.approximate = true;
  std::vector<Vec> starts;
  if (set.bounded() && set.dim() <= 8) starts = set.vertices();
  Vec center(set.dim());
  for (int i = 0; i < set.dim(); ++i) {
    const double lo = set.lo()(i), hi = set.hi()(i);
    center(i) = std::isfinite(lo) && std::isfinite(hi) ? 0.5 * (lo + hi)
                : std::isfinite(lo)                     ? lo
                : std::isfinite(hi)                     ? hi
                                                        : 0.0;
  }
  starts.push_back(center);
  if (hint != nullptr) starts.push_back(set.project(*hint));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int s = 0; s < kRandomStarts; ++s) {
    Vec v(set.dim());
    for (int i = 0; i < set.dim(); ++i) {
      const double lo = set.lo()(i), hi = set.hi()(i);
      v(i) = std::isfinite(lo) && std::isfinite(hi) ? lo + (hi - lo) * unit(rng) : center(i) + normal(rng);
    }
    starts.push_back(set.project(v));
  }

  best.value = -std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    const double fs = fn(s);
    if (!std::isfinite(fs)) throw NumericalError("objective is not finite at a start point");
    if (fs > best.value) {
      best.value = fs;
      best.argmax = s;
    }
    ascend(set, fn, s, fs, best);
  }
  return best;
}

}  // namespace delaypmp
