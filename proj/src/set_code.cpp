// SPDX-License-Identifier: Apache-2.0
#include "daquant/set_code.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "daquant/errors.hpp"

namespace daquant {

namespace {

// Cumulative tables beyond this weight are evaluated on demand instead of
// stored; keeps memory bounded for m in the tens of thousands.
constexpr std::uint64_t kCumulativeCacheLimit = 1u << 19;

void check_dm(int d, int m) {
  if (d < 1) throw ConfigError("set_code: d must be >= 1");
  if (m < 2) throw ConfigError("set_code: m must be >= 2");
}

}  // namespace

BigInt binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  BigInt r = 1;
  for (std::uint64_t j = 1; j <= k; ++j) {
    mpz_mul_ui(r.get_mpz_t(), r.get_mpz_t(), n - k + j);
    mpz_divexact_ui(r.get_mpz_t(), r.get_mpz_t(), j);
  }
  return r;
}

int ceil_log2(const BigInt& v) {
  if (v <= 0) throw DomainError("ceil_log2: value must be positive");
  if (v == 1) return 0;
  const std::size_t top = mpz_sizeinbase(v.get_mpz_t(), 2);  // floor(log2)+1
  const bool pow2 = mpz_scan1(v.get_mpz_t(), 0) == top - 1;
  return static_cast<int>(pow2 ? top - 1 : top);
}

BigInt set_size(int d, int m) {
  check_dm(d, m);
  const std::uint64_t qmax =
      static_cast<std::uint64_t>(m - 1) * static_cast<std::uint64_t>(m - 1);
  return binomial(2 * static_cast<std::uint64_t>(d) + qmax, qmax);
}

double bits_bound(int d, int m) {
  check_dm(d, m);
  const double dd = 2.0 * d;
  const double m2 = static_cast<double>(m) * m;
  const double e = 2.71828182845904523536;
  const double left = dd * std::log2(e * (dd + m2) / dd);
  const double right = m2 * std::log2(e * (dd + m2) / m2);
  return 2.0 * std::log2(static_cast<double>(m)) + std::min(left, right);
}

SetSizeTable::SetSizeTable(int d, int m) : d_(d), m_(m) {
  check_dm(d, m);
  qmax_ = static_cast<std::uint64_t>(m - 1) * static_cast<std::uint64_t>(m - 1);
  if (qmax_ <= kCumulativeCacheLimit) {
    cum_.reserve(qmax_ + 1);
    BigInt wq = 1;  // C(2d+q-1, q), starting at q = 0
    BigInt cq = 1;
    cum_.push_back(cq);
    for (std::uint64_t q = 1; q <= qmax_; ++q) {
      // C(2d+q-1, q) = C(2d+q-2, q-1) * (2d+q-1) / q
      mpz_mul_ui(wq.get_mpz_t(), wq.get_mpz_t(), 2 * d + q - 1);
      mpz_divexact_ui(wq.get_mpz_t(), wq.get_mpz_t(), q);
      cq += wq;
      cum_.push_back(cq);
    }
    size_ = cum_.back();
  } else {
    size_ = binomial(2 * static_cast<std::uint64_t>(d) + qmax_, qmax_);
  }
  bits_ = ceil_log2(size_);
}

BigInt SetSizeTable::cumulative(std::uint64_t q) const {
  if (q > qmax_) throw DomainError("SetSizeTable: weight above (m-1)^2");
  if (!cum_.empty()) return cum_[q];
  return binomial(2 * static_cast<std::uint64_t>(d_) + q, q);
}

BigInt SetSizeTable::weight_count(std::uint64_t q) const {
  if (q == 0) return 1;
  return cumulative(q) - cumulative(q - 1);
}

std::uint64_t SetSizeTable::find_weight(const BigInt& r) const {
  if (r < 0 || r >= size_) throw CorruptMessage("rank outside [0, |S|)");
  if (!cum_.empty()) {
    auto it = std::upper_bound(cum_.begin(), cum_.end(), r);
    return static_cast<std::uint64_t>(it - cum_.begin());
  }
  std::uint64_t lo = 0, hi = qmax_;
  while (lo < hi) {  // smallest q with c_q > r
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (cumulative(mid) > r)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

bool in_set(const LevelPair& pair, const SetSizeTable& table) {
  // S caps only the total weight; individual entries may exceed m-1 for
  // members never produced by the encoder.
  const std::size_t d = static_cast<std::size_t>(table.dim());
  if (pair.plus.size() != d || pair.minus.size() != d) return false;
  return pair.weight() <= table.max_weight();
}

BigInt composition_rank(std::span<const std::uint32_t> t) {
  const std::size_t n = t.size();
  BigInt r = 0;
  if (n < 2) return r;
  // Bars of the stars-and-bars arrangement sit at p_i = s_i + i - 1 with
  // s_i the prefix sum; the colex rank is sum_i C(p_i, i). The binomial is
  // carried along the walk, one multiply/divide per step.
  std::uint64_t p = t[0];
  std::uint64_t k = 1;
  BigInt cur = static_cast<unsigned long>(t[0]);  // C(p, 1)
  r += cur;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    // k -> k+1, p -> p+1: C(p+1, k+1) = C(p, k) * (p+1) / (k+1)
    ++p;
    ++k;
    if (p < k) {
      cur = 0;
    } else if (p == k) {
      cur = 1;
    } else {
      mpz_mul_ui(cur.get_mpz_t(), cur.get_mpz_t(), p);
      mpz_divexact_ui(cur.get_mpz_t(), cur.get_mpz_t(), k);
    }
    // raise p by t[i]: C(p+1, k) = C(p, k) * (p+1) / (p+1-k)
    for (std::uint32_t step = 0; step < t[i]; ++step) {
      ++p;
      if (p == k) {
        cur = 1;
      } else {
        mpz_mul_ui(cur.get_mpz_t(), cur.get_mpz_t(), p);
        mpz_divexact_ui(cur.get_mpz_t(), cur.get_mpz_t(), p - k);
      }
    }
    r += cur;
  }
  return r;
}

std::vector<std::uint32_t> composition_unrank(BigInt r, std::uint64_t q,
                                              std::size_t parts) {
  if (parts < 1) throw DomainError("composition_unrank: parts must be >= 1");
  std::vector<std::uint32_t> t(parts, 0);
  if (parts == 1) {
    t[0] = static_cast<std::uint32_t>(q);
    return t;
  }
  const std::size_t bars = parts - 1;
  std::vector<std::uint64_t> p(bars, 0);
  // Walk downward from the maximal bar position, recovering bars greedily
  // from the most significant term of the combinatorial number system.
  std::uint64_t pos = q + bars - 1;
  std::uint64_t k = bars;
  BigInt cur = binomial(pos, k);
  for (std::size_t i = bars; i >= 1; --i) {
    while (cur > r) {
      // C(pos-1, k) = C(pos, k) * (pos-k) / pos
      mpz_mul_ui(cur.get_mpz_t(), cur.get_mpz_t(), pos - k);
      mpz_divexact_ui(cur.get_mpz_t(), cur.get_mpz_t(), pos);
      --pos;
    }
    p[i - 1] = pos;
    r -= cur;
    // k -> k-1 at fixed pos: C(pos, k-1) = C(pos, k) * k / (pos-k+1)
    --k;
    if (i > 1) {
      if (pos == k) {
        cur = 1;
      } else if (pos < k) {
        cur = 0;
      } else {
        mpz_mul_ui(cur.get_mpz_t(), cur.get_mpz_t(), k + 1);
        mpz_divexact_ui(cur.get_mpz_t(), cur.get_mpz_t(), pos - k);
      }
    }
  }
  if (r != 0) throw CorruptMessage("composition_unrank: residual rank");
  std::uint64_t prev_s = 0;
  for (std::size_t i = 0; i < bars; ++i) {
    const std::uint64_t s = p[i] - i;  // s_i = p_i - i + 1 with i 1-based
    t[i] = static_cast<std::uint32_t>(s - prev_s);
    prev_s = s;
  }
  t[bars] = static_cast<std::uint32_t>(q - prev_s);
  return t;
}

BigInt rank_pair(const LevelPair& pair, const SetSizeTable& table) {
  if (!in_set(pair, table))
    throw MembershipError("rank_pair: pair outside the alphabet S");
  const std::uint64_t q = pair.weight();
  std::vector<std::uint32_t> t;
  t.reserve(pair.plus.size() + pair.minus.size());
  t.insert(t.end(), pair.plus.begin(), pair.plus.end());
  t.insert(t.end(), pair.minus.begin(), pair.minus.end());
  BigInt r = composition_rank(t);
  if (q > 0) r += table.cumulative(q - 1);
  return r;
}

LevelPair unrank_pair(const BigInt& r, const SetSizeTable& table) {
  if (r < 0 || r >= table.size())
    throw CorruptMessage("unrank_pair: rank outside [0, |S|)");
  const std::uint64_t q = table.find_weight(r);
  BigInt within = r;
  if (q > 0) within -= table.cumulative(q - 1);
  const std::size_t d = static_cast<std::size_t>(table.dim());
  const auto t = composition_unrank(std::move(within), q, 2 * d);
  LevelPair pair;
  pair.plus.assign(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(d));
  pair.minus.assign(t.begin() + static_cast<std::ptrdiff_t>(d), t.end());
  return pair;
}

}  // namespace daquant
