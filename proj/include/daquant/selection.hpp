// SPDX-License-Identifier: Apache-2.0
//
// Transmit/skip gate: a sample is quantized and sent only if its forward
// loss exceeds the current threshold.
#pragma once

#include <cstdint>

namespace daquant {

enum class SelectionKind { Disabled, TheorySchedule, AdaptiveEpoch };

struct ThresholdPolicy {
  SelectionKind kind = SelectionKind::Disabled;
  double c = 0.25;      // theory scale; c/i schedule needs c <= 1/4
  double alpha = 0.2;   // adaptive factor
  double current = 0.0;

  void validate() const;
};

struct EpochStats {
  std::int64_t transmitted = 0;
  std::int64_t skipped = 0;
  double transmitted_loss_sum = 0.0;

  double mean_transmitted_loss() const {
    return transmitted > 0 ? transmitted_loss_sum / transmitted : 0.0;
  }
};

// Strict inequality: a loss exactly at the threshold is skipped.
bool should_transmit(double loss, const ThresholdPolicy& policy);

// Schedule c/i; with c = 1/4 the thresholds satisfy
// sum_{i=1}^n sqrt(l_th(i)) <= sqrt(n) for every horizon n.
double theory_threshold(std::int64_t i, double c);

// alpha times the mean loss of the previous epoch's transmitted samples;
// reopens the gate (returns 0) after an all-skipped epoch.
double adaptive_threshold(const EpochStats& prev, double alpha);

}  // namespace daquant
