#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "fednew/linalg.hpp"

namespace fednew {

class QuantizationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Levels, range and resolution of one differentially encoded vector.
/// `range` is always exactly representable as a 32-bit float.
struct QuantMsg {
  std::vector<std::uint32_t> levels;
  double range = 0.0;
  int bits = 0;

  Index dim() const { return static_cast<Index>(levels.size()); }
};

/// Per-sender quantizer state. `prev_hat` is the last reconstructed vector,
/// which the receiver tracks in lockstep.
class QuantState {
 public:
  QuantState(Index dim, int bits, std::uint64_t seed, std::uint64_t stream = 0);

  const VectorXd& prev_hat() const { return prev_hat_; }
  int bits() const { return bits_; }

  /// Draws the next uniform in [0, 1) from the private stream.
  double next_uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  void set_prev_hat(VectorXd v) { prev_hat_ = std::move(v); }

 private:
  VectorXd prev_hat_;
  int bits_;
  std::mt19937_64 engine_;
};

inline std::uint32_t max_level(int bits) {
  return static_cast<std::uint32_t>((std::uint64_t{1} << bits) - 1);
}

/// Spacing between adjacent levels: 2R / (2^b - 1).
inline double step_size(double range, int bits) {
  return 2.0 * range / static_cast<double>(max_level(bits));
}

/// Stochastically rounds (y - prev_hat + R) / step onto integer levels with
/// an unbiased choice between floor and ceil, then advances
/// state.prev_hat to the receiver's reconstruction.
QuantMsg encode(const VectorXd& y, QuantState& state);

/// prev_hat + step * q - R * 1
VectorXd decode(const QuantMsg& msg, const VectorXd& prev_hat);

/// b * d + b_R, with b_R the bits spent on the range value.
std::uint64_t payload_bits(const QuantMsg& msg, int range_bits = 32);

}  // namespace fednew
