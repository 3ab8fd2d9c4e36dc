// SPDX-License-Identifier: Apache-2.0
#include "daquant/scalar_code.hpp"

#include <cmath>

#include "daquant/errors.hpp"

namespace daquant {

bool scalar_1bit_encode(double x, RandomStream& rng) {
  if (!std::isfinite(x) || std::abs(x) > 1.0)
    throw DomainError("scalar_1bit_encode: |x| must be <= 1");
  return rng.bernoulli((x + 1.0) / 2.0);
}

double scalar_1bit_decode(bool bit) { return bit ? 1.0 : -1.0; }

int ceil_log2_u64(std::uint64_t v) {
  if (v == 0) throw DomainError("ceil_log2_u64: value must be positive");
  int bits = 0;
  std::uint64_t p = 1;
  while (p < v) {
    p <<= 1;
    ++bits;
  }
  return bits;
}

int poly_example_bits(int k) {
  if (k < 1) throw DomainError("poly codec needs degree k >= 1");
  return 1 + ceil_log2_u64(static_cast<std::uint64_t>(k) + 1);
}

PolyExampleCode poly_example_encode(double z, double fprime, int k,
                                    RandomStream& rng) {
  if (!std::isfinite(z) || std::abs(z) > 1.0)
    throw DomainError("poly codec: |z| must be <= 1");
  const int nbits = poly_example_bits(k) - 1;
  PolyExampleCode code;
  code.grad_bit = scalar_1bit_encode(fprime, rng);
  code.power_bits.reserve(static_cast<std::size_t>(nbits));
  double zp = z;  // z^(2^j)
  for (int j = 0; j < nbits; ++j) {
    code.power_bits.push_back(scalar_1bit_encode(zp, rng));
    zp = zp * zp;
  }
  return code;
}

std::vector<double> poly_example_decode(const PolyExampleCode& code, int k) {
  const int nbits = poly_example_bits(k) - 1;
  if (static_cast<int>(code.power_bits.size()) != nbits)
    throw CorruptMessage("poly codec: wrong number of power bits");
  const int h = k + 1;
  const double s = scalar_1bit_decode(code.grad_bit) / std::sqrt(h);
  std::vector<double> ghat(static_cast<std::size_t>(h));
  for (int i = 0; i <= k; ++i) {
    double q = 1.0;
    for (int j = 0; j < nbits; ++j)
      if ((i >> j) & 1) q *= scalar_1bit_decode(code.power_bits[j]);
    ghat[static_cast<std::size_t>(i)] = s * q;
  }
  return ghat;
}

}  // namespace daquant
