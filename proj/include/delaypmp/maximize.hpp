#pragma once

#include <cstdint>
#include <functional>

#include "delaypmp/model.hpp"

namespace delaypmp {

struct SetMaximum {
  double value = 0.0;
  Vec argmax;
  /// False only when the set was enumerated (finite list or single point).
  bool approximate = false;
};

/// Maximize fn over a control set. Finite sets are enumerated with the lowest
/// index winning ties. Boxes use vertex enumeration plus projected ascent from
/// the centre, the hint and 8 starts drawn from `seed`; the ascent takes
/// curvature-scaled steps so the result is invariant under positive scaling
/// of fn.
SetMaximum maximize_over(const ControlSet& set, const std::function<double(const Vec&)>& fn,
                         std::uint64_t seed, const Vec* hint = nullptr);

}  // namespace delaypmp
