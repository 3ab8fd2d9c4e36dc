// SPDX-License-Identifier: Apache-2.0
//
// One-coordinate stochastic correction turning the gradient-at-quantized-
// point into an unbiased estimate of the true stochastic gradient for
// ceil(log2(h)) + 1 bits (1 bit under shared randomness).
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "daquant/random.hpp"

namespace daquant {

struct CorrectionParams {
  double c_z = 1.0;   // Lipschitz constant of the gradient in z
  double bound = 1.0; // B
  int d = 1;          // data dimension
  int h = 1;          // model dimension
  int m = 2;          // quantizer levels

  void validate() const;
  // Guaranteed per-coordinate cap on delta = g_z(w) - g_zQ(w):
  // C_z * B * sqrt(d) / (m-1).
  double delta_cap() const;
};

struct CorrectionMsg {
  int istar = 0;  // zero-based coordinate index
  bool e_g = false;
  bool uses_shared_randomness = false;

  std::int64_t wire_bits(int h) const;  // ceil(log2 h) + 1, or 1 when shared
};

struct GradCorrEncodeResult {
  CorrectionMsg msg;
  bool cap_exceeded = false;  // |delta_istar| > delta_cap; p was clamped
};

// Draw order is fixed: istar first, then the Bernoulli bit, so a decoder
// sharing the stream can regenerate istar by drawing once.
GradCorrEncodeResult gradcorr_encode(std::span<const double> delta,
                                     const CorrectionParams& params,
                                     RandomStream& rng,
                                     bool shared_randomness = false);

// deltahat: single nonzero coordinate at istar of magnitude h * delta_cap,
// sign 2 e_g - 1.
std::vector<double> gradcorr_decode(const CorrectionMsg& msg,
                                    const CorrectionParams& params);

// ghat = g_at_zq + deltahat (elementwise).
std::vector<double> assemble_gradient(std::span<const double> g_at_zq,
                                      std::span<const double> deltahat);

// Wire payload (MSB-first): istar as big-endian unsigned in exactly
// ceil(log2 h) bits, then e_g as one bit; shared-randomness mode transmits
// only the e_g bit.
std::vector<std::uint8_t> pack_correction_payload(const CorrectionMsg& msg,
                                                  int h);
CorrectionMsg unpack_correction_payload(std::span<const std::uint8_t> bytes,
                                        int h, bool shared_randomness,
                                        int shared_istar = 0);

}  // namespace daquant
