// SPDX-License-Identifier: Apache-2.0
#include "daquant/selection.hpp"

#include <cmath>

#include "daquant/errors.hpp"

namespace daquant {

void ThresholdPolicy::validate() const {
  if (kind == SelectionKind::TheorySchedule && !(c >= 0 && c <= 0.25))
    throw ConfigError("selection.c: theory schedule needs 0 <= c <= 1/4");
  if (kind == SelectionKind::AdaptiveEpoch && !(alpha > 0 && alpha <= 1))
    throw ConfigError("selection.alpha: must be in (0, 1]");
  if (current < 0) throw ConfigError("selection threshold must be >= 0");
}

bool should_transmit(double loss, const ThresholdPolicy& policy) {
  if (!std::isfinite(loss) || loss < 0)
    throw DomainError("should_transmit: loss must be finite and >= 0");
  if (policy.kind == SelectionKind::Disabled) return true;
  return loss > policy.current;
}

double theory_threshold(std::int64_t i, double c) {
  if (i < 1) throw DomainError("theory_threshold: iteration index starts at 1");
  return c / static_cast<double>(i);
}

double adaptive_threshold(const EpochStats& prev, double alpha) {
  if (prev.transmitted == 0) return 0.0;
  return alpha * prev.mean_transmitted_loss();
}

}  // namespace daquant
