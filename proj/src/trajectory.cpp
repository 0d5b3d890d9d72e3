#include "delaypmp/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "delaypmp/errors.hpp"

namespace delaypmp {

namespace {

double boundary_slack(double a, double b) {
  return 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

Trajectory::Trajectory(std::vector<double> times, Mat values, Interp interp)
    : times_(std::move(times)), values_(std::move(values)), interp_(interp) {
  if (times_.empty()) throw InvalidArgument("trajectory needs at least one sample");
  if (static_cast<std::size_t>(values_.cols()) != times_.size())
    throw InvalidArgument("trajectory: " + std::to_string(values_.cols()) + " values for " +
                          std::to_string(times_.size()) + " times");
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1]))
      throw InvalidArgument("trajectory sample times must be strictly increasing");
  }
}

Trajectory Trajectory::constant(double a, double b, const Vec& value, Interp interp) {
  if (b < a) throw InvalidArgument("constant trajectory: empty interval");
  if (b == a) return Trajectory({a}, Mat(value), interp);
  Mat vals(value.size(), 2);
  vals.col(0) = value;
  vals.col(1) = value;
  return Trajectory({a, b}, std::move(vals), interp);
}

Trajectory Trajectory::sampled(double a, double b, int intervals, int dim,
                               const std::function<Vec(double)>& fn, Interp interp) {
  auto times = uniform_grid(a, b, intervals);
  Mat vals(dim, static_cast<Eigen::Index>(times.size()));
  for (std::size_t i = 0; i < times.size(); ++i) vals.col(static_cast<Eigen::Index>(i)) = fn(times[i]);
  return Trajectory(std::move(times), std::move(vals), interp);
}

bool Trajectory::contains(double t) const {
  const double slack = boundary_slack(start(), end());
  return t >= start() - slack && t <= end() + slack;
}

int Trajectory::locate(double t) const {
  if (!contains(t))
    throw DomainError("trajectory evaluated at t=" + std::to_string(t) + " outside [" +
                      std::to_string(start()) + ", " + std::to_string(end()) + "]");
  const int n = size();
  if (n == 1) return 0;
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  int i = static_cast<int>(it - times_.begin()) - 1;
  return std::clamp(i, 0, n - 2);
}

Vec Trajectory::operator()(double t, Side side) const {
  const int i = locate(t);
  if (size() == 1) return values_.col(0);
  const double t0 = times_[static_cast<std::size_t>(i)];
  const double t1 = times_[static_cast<std::size_t>(i) + 1];
  if (interp_ == Interp::Linear) {
    const double w = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    return (1.0 - w) * values_.col(i) + w * values_.col(i + 1);
  }
  // Piecewise constant: sample i on [t_i, t_{i+1}); the final sample only at the end point.
  // Evaluation times within round-off of a node are treated as the node itself.
  const double snap = 1e-10 * std::max(1.0, std::abs(t));
  int node = -1;
  if (std::abs(t - t0) <= snap) node = i;
  else if (std::abs(t1 - t) <= snap) node = i + 1;
  if (node < 0) return values_.col(i);
  if (side == Side::Left) return values_.col(std::max(node - 1, 0));
  return values_.col(node);
}

double Trajectory::component(int row, double t, Side side) const {
  return (*this)(t, side)(row);
}

Trajectory Trajectory::resampled(std::vector<double> newTimes) const {
  Mat vals(dim(), static_cast<Eigen::Index>(newTimes.size()));
  for (std::size_t i = 0; i < newTimes.size(); ++i)
    vals.col(static_cast<Eigen::Index>(i)) = (*this)(newTimes[i]);
  return Trajectory(std::move(newTimes), std::move(vals), interp_);
}

double Trajectory::supNorm() const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < values_.cols(); ++i) s = std::max(s, values_.col(i).norm());
  return s;
}

std::vector<double> uniform_grid(double a, double b, int intervals) {
  if (intervals < 1) throw InvalidArgument("uniform_grid needs at least one interval");
  std::vector<double> t(static_cast<std::size_t>(intervals) + 1);
  const double h = (b - a) / intervals;
  for (int i = 0; i <= intervals; ++i) t[static_cast<std::size_t>(i)] = a + i * h;
  t.back() = b;
  return t;
}

std::vector<double> merged_grid(std::span<const std::vector<double>> lists, double a, double b,
                                double mergeTol) {
  std::vector<double> all{a, b};
  for (const auto& l : lists)
    for (double t : l)
      if (t > a && t < b) all.push_back(t);
  std::sort(all.begin(), all.end());
  const double tol = mergeTol * std::max({1.0, std::abs(a), std::abs(b)});
  std::vector<double> out;
  out.reserve(all.size());
  for (double t : all) {
    if (out.empty() || t - out.back() > tol) out.push_back(t);
  }
  // Keep the exact end point.
  if (b - out.back() <= tol) out.back() = b;
  if (out.size() > 1 && out.back() != b) out.push_back(b);
  return out;
}

}  // namespace delaypmp
