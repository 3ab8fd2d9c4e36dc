// SPDX-License-Identifier: Apache-2.0
//
// Exact minimal-bit coding over the alphabet
//   S = { (a, b) in N^d x N^d : |a|_1 + |b|_1 <= (m-1)^2 }.
// Pairs are ordered by total weight q = |a|_1 + |b|_1 ascending, then by the
// colexicographic rank of the 2d-part weak composition of q (combinatorial
// number system). rank / unrank are exact inverses over [0, |S|).
#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <span>
#include <vector>

namespace daquant {

using BigInt = mpz_class;

// C(n, k) as an exact big integer; 0 when k > n.
BigInt binomial(std::uint64_t n, std::uint64_t k);

// ceil(log2(v)) for v >= 1.
int ceil_log2(const BigInt& v);

// |S(d, m)| = sum_{q=0}^{(m-1)^2} C(2d+q-1, q) = C(2d+(m-1)^2, (m-1)^2).
BigInt set_size(int d, int m);

// Theorem-style upper bound on the per-sample bit cost:
//   2 log2(m) + min{ 2d log2(e (2d+m^2) / (2d)), m^2 log2(e (2d+m^2) / m^2) }.
double bits_bound(int d, int m);

struct LevelPair {
  std::vector<std::uint32_t> plus;   // a: level indices of z^+
  std::vector<std::uint32_t> minus;  // b: level indices of z^-

  std::uint64_t weight() const {
    std::uint64_t w = 0;
    for (auto v : plus) w += v;
    for (auto v : minus) w += v;
    return w;
  }
};

// Cumulative member counts of S(d, m), immutable and shareable between
// threads once constructed. For small (m-1)^2 the cumulative counts are
// precomputed; for large ones they are evaluated on demand in closed form.
class SetSizeTable {
 public:
  SetSizeTable(int d, int m);

  int dim() const { return d_; }
  int levels() const { return m_; }
  std::uint64_t max_weight() const { return qmax_; }

  const BigInt& size() const { return size_; }
  int payload_bits() const { return bits_; }  // ceil(log2 |S|)

  // c_q = #{pairs with weight <= q} = C(2d+q, q).
  BigInt cumulative(std::uint64_t q) const;
  // #{pairs with weight == q} = C(2d+q-1, q).
  BigInt weight_count(std::uint64_t q) const;
  // Smallest q with cumulative(q) > r; requires r < |S|.
  std::uint64_t find_weight(const BigInt& r) const;

 private:
  int d_, m_;
  std::uint64_t qmax_;
  std::vector<BigInt> cum_;  // filled only when qmax_ is small
  BigInt size_;
  int bits_ = 0;
};

bool in_set(const LevelPair& pair, const SetSizeTable& table);

// Bijection between S and [0, |S|). Throws MembershipError / CorruptMessage
// on out-of-alphabet inputs.
BigInt rank_pair(const LevelPair& pair, const SetSizeTable& table);
LevelPair unrank_pair(const BigInt& r, const SetSizeTable& table);

// Rank of a weak composition t of q = sum(t) within its weight class,
// colexicographic via the combinatorial number system. Exposed for tests.
BigInt composition_rank(std::span<const std::uint32_t> t);
std::vector<std::uint32_t> composition_unrank(BigInt r, std::uint64_t q,
                                              std::size_t parts);

}  // namespace daquant
