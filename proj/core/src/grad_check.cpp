#include "grouprec/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "grouprec/error.hpp"

namespace grouprec {

bool GradCheckReport::passed() const {
  return std::all_of(blocks.begin(), blocks.end(), [](const auto& b) { return b.passed; });
}

const GradCheckEntry* GradCheckReport::worst() const {
  const GradCheckEntry* w = nullptr;
  for (const auto& b : blocks)
    if (w == nullptr || b.max_rel_error > w->max_rel_error) w = &b;
  return w;
}

GradCheckReport grad_check(const std::function<double()>& loss, std::span<const ParamBlock> blocks,
                           double tolerance, const GradCheckOptions& options) {
  auto checked_loss = [&](const std::string& block) {
    const double v = loss();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss while probing " + block);
    return v;
  };
  checked_loss("<baseline>");

  GradCheckReport report;
  report.tolerance = tolerance;
  for (const auto& block : blocks) {
    if (block.value == nullptr || block.grad == nullptr || !block.value->same_shape(*block.grad)) {
      throw ShapeError("grad_check: block '" + block.name + "' has missing or mismatched grad");
    }
    GradCheckEntry entry;
    entry.name = block.name;
    auto values = block.value->values();
    auto grads = block.grad->values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double up = checked_loss(block.name);
      values[i] = saved - options.step;
      const double down = checked_loss(block.name);
      values[i] = saved;

      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = grads[i];
      const double abs_err = std::abs(analytic - numeric);
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), options.denominator_floor});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, abs_err / denom);
      ++entry.elements;
    }
    entry.passed = entry.max_rel_error < tolerance;
    report.blocks.push_back(std::move(entry));
  }
  return report;
}

}  // namespace grouprec
