#pragma once

#include <string>

#include "delaypmp/io.hpp"

namespace testsupport {

inline std::string problem_path(const std::string& name) {
  return std::string(DELAYPMP_PROBLEMS_DIR) + "/" + name + ".json";
}

inline delaypmp::ProblemSpec problem(const std::string& name) {
  return delaypmp::io::load_problem(problem_path(name));
}

/// Closed form of x' = x(t - 1), x = 1 on [-1, 0], for t in [0, 3].
inline double unit_delay_solution(double t) {
  if (t <= 1.0) return 1.0 + t;
  if (t <= 2.0) {
    const double s = t - 1.0;
    return 2.0 + s + 0.5 * s * s;
  }
  const double s = t - 2.0;
  return 3.5 + 2.0 * s + 0.5 * s * s + s * s * s / 6.0;
}

}  // namespace testsupport

namespace testsupport {

/// Scalar problem on [0, 2] with delays {0, 1}, f = 0, zero costs, U = [-1, 1],
/// d^x = 1. Tests patch the fields they care about.
inline nlohmann::json scalar_doc() {
  return nlohmann::json::parse(R"({
    "name": "test", "S": 0, "T": 2, "delays": [0, 1], "n": 1, "m": 1, "x0": [1],
    "dynamics": {"type": "linear_delay", "A": [0], "B": [0]},
    "control_set": {"type": "box", "lo": [-1], "hi": [1]},
    "initial_data": {"dx": [1], "du": [0]}
  })");
}

inline delaypmp::ProblemSpec spec_of(const nlohmann::json& doc) { return delaypmp::io::parse_problem(doc); }

inline delaypmp::Trajectory constant_control(const delaypmp::ProblemSpec& spec, double v) {
  return delaypmp::Trajectory::constant(spec.S, spec.T, delaypmp::Vec::Constant(spec.m, v),
                                        delaypmp::Interp::PiecewiseConstantLeft);
}

}  // namespace testsupport
