#pragma once

#include <algorithm>

namespace grouprec {

/// Closed rating interval, [1, 5] for the project-rating data.
struct RatingScale {
  double lo = 1.0;
  double hi = 5.0;

  double clamp(double v) const { return std::clamp(v, lo, hi); }
  bool contains(double v) const { return v >= lo && v <= hi; }
  friend bool operator==(const RatingScale&, const RatingScale&) = default;
};

}  // namespace grouprec
