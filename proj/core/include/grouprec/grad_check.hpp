#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "grouprec/matrix.hpp"

namespace grouprec {

/// A named parameter with its gradient accumulator. Non-owning.
struct ParamBlock {
  std::string name;
  Matrix* value = nullptr;
  Matrix* grad = nullptr;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t elements = 0;
  bool passed = true;
};

struct GradCheckReport {
  double tolerance = 0.0;
  std::vector<GradCheckEntry> blocks;

  bool passed() const;
  /// Block with the largest relative error, or nullptr when empty.
  const GradCheckEntry* worst() const;
};

struct GradCheckOptions {
  double step = 1e-5;
  // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double denominator_floor = 1e-6;
};

/// Compares the analytic gradient already stored in each block's `grad`
/// against central finite differences of `loss`. Each parameter is
/// perturbed in place and restored bit-exactly. Throws NumericError if the
/// loss is ever non-finite.
GradCheckReport grad_check(const std::function<double()>& loss, std::span<const ParamBlock> blocks,
                           double tolerance, const GradCheckOptions& options = {});

}  // namespace grouprec
