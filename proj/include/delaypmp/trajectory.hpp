#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace delaypmp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Interp {
  Linear,                 // states and costates (absolutely continuous)
  PiecewiseConstantLeft,  // controls and initial data: value on [t_i, t_{i+1}) is sample i
};

/// Which value to return at a jump of a piecewise-constant function.
/// `Point` is the right-continuous value, `Left` the left limit. Both agree
/// for linear interpolation.
enum class Side { Point, Left };

/// Sampled vector-valued function on a closed interval with dense output.
///
/// Sample times are strictly increasing; the first is the domain start and
/// the last the domain end. A degenerate interval [a, a] holds one sample.
class Trajectory {
 public:
  Trajectory() = default;
  /// `values` holds one sample per column.
  Trajectory(std::vector<double> times, Mat values, Interp interp);

  static Trajectory constant(double a, double b, const Vec& value, Interp interp);
  static Trajectory sampled(double a, double b, int intervals, int dim,
                            const std::function<Vec(double)>& fn, Interp interp);

  double start() const { return times_.front(); }
  double end() const { return times_.back(); }
  int dim() const { return static_cast<int>(values_.rows()); }
  int size() const { return static_cast<int>(times_.size()); }
  bool empty() const { return times_.empty(); }
  Interp interp() const { return interp_; }

  const std::vector<double>& times() const { return times_; }
  const Mat& values() const { return values_; }
  double time(int i) const { return times_[static_cast<std::size_t>(i)]; }
  Vec sample(int i) const { return values_.col(i); }

  bool contains(double t) const;

  /// Evaluate at t. Throws DomainError outside [start, end] (a relative slack
  /// of 1e-12 absorbs round-off at the boundary).
  Vec operator()(double t, Side side = Side::Point) const;
  /// Single component, same conventions.
  double component(int row, double t, Side side = Side::Point) const;

  /// Index i with times[i] <= t < times[i+1] (last cell for t == end).
  int locate(double t) const;

  /// Resample onto new times inside the domain, keeping the interpolation.
  Trajectory resampled(std::vector<double> newTimes) const;

  /// Sup over samples of the Euclidean norm.
  double supNorm() const;

 private:
  std::vector<double> times_;
  Mat values_;
  Interp interp_ = Interp::Linear;
};

/// Uniform grid a = t_0 < ... < t_K = b.
std::vector<double> uniform_grid(double a, double b, int intervals);

/// Sorted union of several time lists restricted to [a, b], with points closer
/// than `mergeTol` merged.
std::vector<double> merged_grid(std::span<const std::vector<double>> lists, double a, double b,
                                double mergeTol = 1e-12);

}  // namespace delaypmp
