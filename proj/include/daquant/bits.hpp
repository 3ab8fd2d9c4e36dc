// SPDX-License-Identifier: Apache-2.0
//
// MSB-first bit packing. The final byte of a payload is zero-padded; bit
// counts always refer to unpadded bits.
#pragma once

#include <gmpxx.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "daquant/errors.hpp"

namespace daquant {

class BitWriter {
 public:
  void put_bit(bool b) {
    const std::size_t byte = nbits_ / 8;
    if (byte == bytes_.size()) bytes_.push_back(0);
    if (b) bytes_[byte] |= static_cast<std::uint8_t>(0x80u >> (nbits_ % 8));
    ++nbits_;
  }

  // Low `n` bits of v, most significant first.
  void put_uint(std::uint64_t v, int n) {
    for (int i = n - 1; i >= 0; --i) put_bit((v >> i) & 1u);
  }

  // IEEE-754 binary64, big-endian byte order.
  void put_f64(double x) {
    std::uint64_t u;
    std::memcpy(&u, &x, sizeof(u));
    put_uint(u, 64);
  }

  // Big integer as a big-endian unsigned field of exactly n bits.
  void put_bigint(const mpz_class& v, int n) {
    for (int i = n - 1; i >= 0; --i)
      put_bit(mpz_tstbit(v.get_mpz_t(), static_cast<mp_bitcnt_t>(i)) != 0);
  }

  std::int64_t bit_count() const { return static_cast<std::int64_t>(nbits_); }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t nbits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool get_bit() {
    const std::size_t byte = pos_ / 8;
    if (byte >= bytes_.size()) throw CorruptMessage("payload truncated");
    const bool b = (bytes_[byte] >> (7 - pos_ % 8)) & 1u;
    ++pos_;
    return b;
  }

  std::uint64_t get_uint(int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 1) | (get_bit() ? 1u : 0u);
    return v;
  }

  double get_f64() {
    const std::uint64_t u = get_uint(64);
    double x;
    std::memcpy(&x, &u, sizeof(x));
    return x;
  }

  mpz_class get_bigint(int n) {
    mpz_class v = 0;
    for (int i = n - 1; i >= 0; --i)
      if (get_bit()) mpz_setbit(v.get_mpz_t(), static_cast<mp_bitcnt_t>(i));
    return v;
  }

  std::size_t bits_read() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace daquant
