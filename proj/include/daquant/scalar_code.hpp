// SPDX-License-Identifier: Apache-2.0
//
// One-bit stochastic scalar quantizer on [-1, 1] and the log-cost codec for
// polynomial-feature losses built on top of it.
#pragma once

#include <vector>

#include "daquant/random.hpp"

namespace daquant {

// Encode: 1 with probability (x+1)/2, else 0. Decode: 2b - 1.
// E[decode(encode(x))] = x, |decode| = 1 always.
bool scalar_1bit_encode(double x, RandomStream& rng);
double scalar_1bit_decode(bool bit);

// ceil(log2(v)) for machine integers, v >= 1.
int ceil_log2_u64(std::uint64_t v);

// For loss (1/sqrt(h)) f(w^T v(z)) with v(z) = [1, z, ..., z^k], h = k+1:
// one sign bit for f'(w^T v(z)) plus one bit per power z^(2^j),
// j = 0..ceil(log2(h))-1, so that every exponent in [0, k] is reachable as a
// sum of distinct powers of two.
struct PolyExampleCode {
  bool grad_bit = false;          // Q^e(f'(w^T v(z)))
  std::vector<bool> power_bits;   // Q^e(z^(2^j))
};

int poly_example_bits(int k);  // 1 + ceil(log2(k+1))

PolyExampleCode poly_example_encode(double z, double fprime, int k,
                                    RandomStream& rng);

// Agent-side reconstruction: ghat_i = (1/sqrt(h)) Qd(grad_bit) prod_j
// Qd(power_bits_j)^{b_j(i)} with b_j(i) the j-th least-significant bit of i.
std::vector<double> poly_example_decode(const PolyExampleCode& code, int k);

}  // namespace daquant
