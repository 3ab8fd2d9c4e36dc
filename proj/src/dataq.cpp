// SPDX-License-Identifier: Apache-2.0
#include "daquant/dataq.hpp"

#include <algorithm>
#include <cmath>

#include "daquant/bits.hpp"
#include "daquant/errors.hpp"

namespace daquant {

namespace {

void check_finite(std::span<const double> z) {
  for (double v : z)
    if (!std::isfinite(v)) throw DomainError("data point has non-finite entry");
}

double l2_norm(std::span<const double> z) {
  double s = 0;
  for (double v : z) s += v * v;
  return std::sqrt(s);
}

void check_table(const QuantConfig& cfg, const SetSizeTable& table) {
  if (table.dim() != cfg.d || table.levels() != cfg.m)
    throw ConfigError("quant: SetSizeTable does not match QuantConfig (d, m)");
}

// Largest level index i with i*B/(m-1) <= v, clamped to [0, m-1]. Guards the
// floor against FP round-up across a level boundary.
std::uint32_t level_floor(double v, double bound, int m) {
  const double u = (m - 1) * v / bound;
  auto i = static_cast<std::int64_t>(std::floor(u));
  if (i > 0 && static_cast<double>(i) * bound > (m - 1) * v) --i;
  i = std::clamp<std::int64_t>(i, 0, m - 1);
  return static_cast<std::uint32_t>(i);
}

EncodedSample make_encoded(const LevelPair& pair, const SetSizeTable& table,
                           std::optional<double> scale) {
  EncodedSample enc;
  enc.rank = rank_pair(pair, table);
  enc.bit_length = table.payload_bits();
  enc.scale = scale;
  enc.header_bits = scale ? 64 : 0;
  return enc;
}

// Quantize the nonnegative split vector with plain floors; membership in S
// is then guaranteed by the norm bound.
LevelPair floor_levels(std::span<const double> zplus,
                       std::span<const double> zminus, double bound, int m) {
  LevelPair pair;
  pair.plus.reserve(zplus.size());
  pair.minus.reserve(zminus.size());
  for (double v : zplus) pair.plus.push_back(level_floor(v, bound, m));
  for (double v : zminus) pair.minus.push_back(level_floor(v, bound, m));
  return pair;
}

struct ScaledView {
  std::vector<double> values;    // what the grid actually sees
  std::optional<double> header;  // scale to transmit, if any
  double grid_bound;
};

ScaledView apply_mode(const DataPoint& z, const QuantConfig& cfg) {
  ScaledView out;
  switch (cfg.mode) {
    case QuantMode::AbsoluteBound: {
      const double n = l2_norm(z.values);
      // relative slack of a few ulps so unit-normalized inputs pass
      if (n > cfg.bound * (1.0 + 1e-12))
        throw BoundViolation("||z||_2 exceeds the configured bound B");
      out.values = z.values;
      out.grid_bound = cfg.bound;
      break;
    }
    case QuantMode::PerSampleNormScaled: {
      const double n = l2_norm(z.values);
      out.values.resize(z.values.size());
      if (n > 0)
        for (std::size_t j = 0; j < out.values.size(); ++j)
          out.values[j] = z.values[j] / n;
      out.header = n;
      out.grid_bound = 1.0;
      break;
    }
    case QuantMode::BatchMaxScaled:
      throw ConfigError("BatchMaxScaled requires dataq_encode_batch");
  }
  return out;
}

}  // namespace

void QuantConfig::validate() const {
  if (m < 2) throw ConfigError("quant.m: must be >= 2");
  if (m > 65536) throw ConfigError("quant.m: must be <= 65536");
  if (d < 1) throw ConfigError("quant.d: must be >= 1");
  if (!(bound > 0)) throw ConfigError("quant.bound: must be > 0");
}

double QuantConfig::effective_bound() const {
  switch (mode) {
    case QuantMode::AbsoluteBound:
      return bound;
    case QuantMode::PerSampleNormScaled:
      return 1.0;
    case QuantMode::BatchMaxScaled:
      return std::sqrt(static_cast<double>(d));
  }
  return bound;
}

std::pair<std::vector<double>, std::vector<double>> split_signed(
    std::span<const double> z) {
  check_finite(z);
  std::vector<double> zplus(z.size()), zminus(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) {
    zplus[j] = std::max(z[j], 0.0);
    zminus[j] = std::max(-z[j], 0.0);
  }
  return {std::move(zplus), std::move(zminus)};
}

EncodeResult dataq_encode(const DataPoint& z, const QuantConfig& cfg,
                          const SetSizeTable& table) {
  cfg.validate();
  check_table(cfg, table);
  check_finite(z.values);
  if (z.d() != cfg.d) throw DomainError("data point dimension mismatch");

  const ScaledView view = apply_mode(z, cfg);
  auto [zplus, zminus] = split_signed(view.values);
  EncodeResult res;
  res.pair = floor_levels(zplus, zminus, view.grid_bound, cfg.m);
  res.enc = make_encoded(res.pair, table, view.header);
  return res;
}

EncodeResult dataq_encode_batch(const DataPoint& z, const QuantConfig& cfg,
                                const SetSizeTable& table, double scale,
                                bool charge_header) {
  cfg.validate();
  check_table(cfg, table);
  check_finite(z.values);
  if (cfg.mode != QuantMode::BatchMaxScaled)
    throw ConfigError("dataq_encode_batch requires BatchMaxScaled mode");
  if (!(scale >= 0) || !std::isfinite(scale))
    throw DomainError("invalid batch scale");

  std::vector<double> scaled(z.values.size(), 0.0);
  if (scale > 0)
    for (std::size_t j = 0; j < scaled.size(); ++j)
      scaled[j] = z.values[j] / scale;
  auto [zplus, zminus] = split_signed(scaled);
  EncodeResult res;
  res.pair = floor_levels(zplus, zminus, cfg.effective_bound(), cfg.m);
  res.enc = make_encoded(res.pair, table,
                         charge_header ? std::optional<double>(scale)
                                       : std::nullopt);
  return res;
}

EncodeResult dataq_stochastic(const DataPoint& z, const QuantConfig& cfg,
                              const SetSizeTable& table, RandomStream& rng) {
  cfg.validate();
  check_table(cfg, table);
  check_finite(z.values);
  if (z.d() != cfg.d) throw DomainError("data point dimension mismatch");

  const ScaledView view = apply_mode(z, cfg);
  auto [zplus, zminus] = split_signed(view.values);
  const double bound = view.grid_bound;
  const std::size_t d = zplus.size();

  std::vector<double> tilde(2 * d);
  std::copy(zplus.begin(), zplus.end(), tilde.begin());
  std::copy(zminus.begin(), zminus.end(),
            tilde.begin() + static_cast<std::ptrdiff_t>(d));

  std::vector<std::uint32_t> floors(2 * d), idx(2 * d);
  for (std::size_t j = 0; j < 2 * d; ++j) {
    const std::uint32_t lo = level_floor(tilde[j], bound, cfg.m);
    floors[j] = lo;
    const double u = (cfg.m - 1) * tilde[j] / bound;
    double frac = u - static_cast<double>(lo);
    frac = std::clamp(frac, 0.0, 1.0);
    std::uint32_t i = lo;
    if (frac > 0 && rng.bernoulli(frac)) ++i;
    idx[j] = std::min<std::uint32_t>(i, static_cast<std::uint32_t>(cfg.m - 1));
  }

  // Stochastic rounding can overshoot the weight cap in corner cases; floor
  // offending coordinates in descending order until membership holds.
  const std::uint64_t cap = table.max_weight();
  std::uint64_t weight = 0;
  for (auto v : idx) weight += v;
  int fallback = 0;
  for (std::size_t j = 2 * d; j-- > 0 && weight > cap;) {
    if (idx[j] > floors[j]) {
      weight -= idx[j] - floors[j];
      idx[j] = floors[j];
      ++fallback;
    }
  }

  EncodeResult res;
  res.pair.plus.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(d));
  res.pair.minus.assign(idx.begin() + static_cast<std::ptrdiff_t>(d), idx.end());
  res.enc = make_encoded(res.pair, table, view.header);
  res.fallback_coords = fallback;
  return res;
}

DataPoint reconstruct(const LevelPair& pair, const QuantConfig& cfg,
                      double scale) {
  const double step = cfg.effective_bound() / (cfg.m - 1);
  DataPoint z;
  z.values.resize(pair.plus.size());
  for (std::size_t j = 0; j < pair.plus.size(); ++j) {
    const double diff = static_cast<double>(pair.plus[j]) -
                        static_cast<double>(pair.minus[j]);
    z.values[j] = diff * step * scale;
  }
  return z;
}

DataPoint dataq_decode(const EncodedSample& enc, const QuantConfig& cfg,
                       const SetSizeTable& table,
                       std::optional<double> batch_scale) {
  cfg.validate();
  check_table(cfg, table);
  if (enc.rank < 0 || enc.rank >= table.size())
    throw CorruptMessage("encoded rank outside [0, |S|)");
  const LevelPair pair = unrank_pair(enc.rank, table);
  double scale = 1.0;
  if (cfg.mode == QuantMode::PerSampleNormScaled) {
    if (!enc.scale) throw CorruptMessage("missing per-sample scale header");
    scale = *enc.scale;
  } else if (cfg.mode == QuantMode::BatchMaxScaled) {
    if (enc.scale)
      scale = *enc.scale;
    else if (batch_scale)
      scale = *batch_scale;
    else
      throw CorruptMessage("missing batch scale");
  }
  return reconstruct(pair, cfg, scale);
}

std::vector<std::uint8_t> pack_sample_payload(const EncodedSample& enc) {
  BitWriter w;
  if (enc.header_bits == 64) {
    if (!enc.scale) throw DomainError("header bits without scale value");
    w.put_f64(*enc.scale);
  }
  w.put_bigint(enc.rank, enc.bit_length);
  return w.take();
}

EncodedSample unpack_sample_payload(std::span<const std::uint8_t> bytes,
                                    const SetSizeTable& table,
                                    bool has_header) {
  BitReader r(bytes);
  EncodedSample enc;
  if (has_header) {
    enc.scale = r.get_f64();
    enc.header_bits = 64;
  }
  enc.bit_length = table.payload_bits();
  enc.rank = r.get_bigint(enc.bit_length);
  if (enc.rank >= table.size())
    throw CorruptMessage("decoded rank outside [0, |S|)");
  return enc;
}

}  // namespace daquant
