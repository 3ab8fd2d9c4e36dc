// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace daquant {

// Input outside the codec's declared domain (non-finite values, |x| > 1, ...).
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ||z||_2 exceeds the configured bound B in AbsoluteBound mode.
struct BoundViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A level pair outside the code alphabet S.
struct MembershipError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Undecodable wire payload (rank out of range, truncated bytes, bad index).
struct CorruptMessage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration; message carries the offending field path.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace daquant
