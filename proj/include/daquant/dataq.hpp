// SPDX-License-Identifier: Apache-2.0
//
// The data-point quantizer: signed split of z into (z+, z-), uniform level
// grid on [0, B], level-index pair encoded as its exact rank within S.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "daquant/random.hpp"
#include "daquant/set_code.hpp"

namespace daquant {

enum class QuantMode {
  AbsoluteBound,       // ||z||_2 <= B enforced, no header
  PerSampleNormScaled, // quantize z/||z||_2 with B=1; 64-bit norm header
  BatchMaxScaled,      // quantize z/s with the batch's max |z_j|; one header
                       // per batch, grid bound sqrt(d) in scaled units
};

struct QuantConfig {
  int m = 2;
  double bound = 1.0;  // B
  int d = 1;
  QuantMode mode = QuantMode::AbsoluteBound;

  void validate() const;
  // Grid bound in the units actually quantized.
  double effective_bound() const;
};

struct DataPoint {
  std::vector<double> values;

  DataPoint() = default;
  explicit DataPoint(std::vector<double> v) : values(std::move(v)) {}
  int d() const { return static_cast<int>(values.size()); }
};

struct EncodedSample {
  BigInt rank;
  int bit_length = 0;                // exactly ceil(log2 |S|)
  std::optional<double> scale;       // header value when present
  int header_bits = 0;               // 0 or 64

  std::int64_t total_bits() const { return bit_length + header_bits; }
};

// z = zplus - zminus, both nonnegative, disjoint supports.
std::pair<std::vector<double>, std::vector<double>> split_signed(
    std::span<const double> z);

struct EncodeResult {
  LevelPair pair;
  EncodedSample enc;
  int fallback_coords = 0;  // stochastic mode: coords floored to restore
                            // membership (pathological corner cases only)
};

EncodeResult dataq_encode(const DataPoint& z, const QuantConfig& cfg,
                          const SetSizeTable& table);

// BatchMaxScaled entry point: `scale` is max_i ||z_i||_inf over the batch;
// the 64-bit header is charged only when `charge_header` is set (once per
// batch).
EncodeResult dataq_encode_batch(const DataPoint& z, const QuantConfig& cfg,
                                const SetSizeTable& table, double scale,
                                bool charge_header);

EncodeResult dataq_stochastic(const DataPoint& z, const QuantConfig& cfg,
                              const SetSizeTable& table, RandomStream& rng);

// Reconstruction: z_Q = (a - b) * B_eff/(m-1), rescaled by `scale`.
DataPoint reconstruct(const LevelPair& pair, const QuantConfig& cfg,
                      double scale = 1.0);

// Decode from rank. For BatchMaxScaled the batch scale must be supplied when
// the sample carries no header.
DataPoint dataq_decode(const EncodedSample& enc, const QuantConfig& cfg,
                       const SetSizeTable& table,
                       std::optional<double> batch_scale = std::nullopt);

// Wire payload: [optional scale header, 64 bits, IEEE-754 big-endian] ++
// [rank as big-endian unsigned in exactly ceil(log2 |S|) bits]; the final
// byte is zero-padded.
std::vector<std::uint8_t> pack_sample_payload(const EncodedSample& enc);
EncodedSample unpack_sample_payload(std::span<const std::uint8_t> bytes,
                                    const SetSizeTable& table,
                                    bool has_header);

}  // namespace daquant
