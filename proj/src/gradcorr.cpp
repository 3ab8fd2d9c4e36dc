// SPDX-License-Identifier: Apache-2.0
#include "daquant/gradcorr.hpp"

#include <algorithm>
#include <cmath>

#include "daquant/bits.hpp"
#include "daquant/errors.hpp"
#include "daquant/scalar_code.hpp"

namespace daquant {

void CorrectionParams::validate() const {
  if (!(c_z > 0)) throw ConfigError("gradcorr.c_z: must be > 0");
  if (!(bound > 0)) throw ConfigError("gradcorr.bound: must be > 0");
  if (d < 1) throw ConfigError("gradcorr.d: must be >= 1");
  if (h < 1) throw ConfigError("gradcorr.h: must be >= 1");
  if (m < 2) throw ConfigError("gradcorr.m: must be >= 2");
}

double CorrectionParams::delta_cap() const {
  return c_z * bound * std::sqrt(static_cast<double>(d)) / (m - 1);
}

std::int64_t CorrectionMsg::wire_bits(int h) const {
  if (uses_shared_randomness) return 1;
  return ceil_log2_u64(static_cast<std::uint64_t>(h)) + 1;
}

GradCorrEncodeResult gradcorr_encode(std::span<const double> delta,
                                     const CorrectionParams& params,
                                     RandomStream& rng,
                                     bool shared_randomness) {
  params.validate();
  if (static_cast<int>(delta.size()) != params.h)
    throw DomainError("gradcorr_encode: delta dimension mismatch");
  for (double v : delta)
    if (!std::isfinite(v)) throw DomainError("gradcorr_encode: non-finite delta");

  GradCorrEncodeResult res;
  res.msg.istar = static_cast<int>(
      rng.uniform_int(static_cast<std::uint64_t>(params.h)));
  res.msg.uses_shared_randomness = shared_randomness;

  const double cap = params.delta_cap();
  double p = delta[static_cast<std::size_t>(res.msg.istar)] / (2.0 * cap) + 0.5;
  if (p < 0.0 || p > 1.0) {
    res.cap_exceeded = true;
    p = std::clamp(p, 0.0, 1.0);
  }
  res.msg.e_g = rng.bernoulli(p);
  return res;
}

std::vector<double> gradcorr_decode(const CorrectionMsg& msg,
                                    const CorrectionParams& params) {
  params.validate();
  if (msg.istar < 0 || msg.istar >= params.h)
    throw CorruptMessage("gradcorr_decode: istar out of range");
  std::vector<double> deltahat(static_cast<std::size_t>(params.h), 0.0);
  const double mag = params.h * params.delta_cap();
  deltahat[static_cast<std::size_t>(msg.istar)] = (msg.e_g ? 1.0 : -1.0) * mag;
  return deltahat;
}

std::vector<double> assemble_gradient(std::span<const double> g_at_zq,
                                      std::span<const double> deltahat) {
  if (g_at_zq.size() != deltahat.size())
    throw DomainError("assemble_gradient: dimension mismatch");
  std::vector<double> ghat(g_at_zq.size());
  for (std::size_t i = 0; i < ghat.size(); ++i)
    ghat[i] = g_at_zq[i] + deltahat[i];
  return ghat;
}

std::vector<std::uint8_t> pack_correction_payload(const CorrectionMsg& msg,
                                                  int h) {
  BitWriter w;
  if (!msg.uses_shared_randomness) {
    const int bits = ceil_log2_u64(static_cast<std::uint64_t>(h));
    w.put_uint(static_cast<std::uint64_t>(msg.istar), bits);
  }
  w.put_bit(msg.e_g);
  return w.take();
}

CorrectionMsg unpack_correction_payload(std::span<const std::uint8_t> bytes,
                                        int h, bool shared_randomness,
                                        int shared_istar) {
  BitReader r(bytes);
  CorrectionMsg msg;
  msg.uses_shared_randomness = shared_randomness;
  if (shared_randomness) {
    msg.istar = shared_istar;
  } else {
    const int bits = ceil_log2_u64(static_cast<std::uint64_t>(h));
    msg.istar = static_cast<int>(r.get_uint(bits));
  }
  msg.e_g = r.get_bit();
  if (msg.istar < 0 || msg.istar >= h)
    throw CorruptMessage("correction payload: istar out of range");
  return msg;
}

}  // namespace daquant
