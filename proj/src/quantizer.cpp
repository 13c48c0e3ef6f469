#include "fednew/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fednew {

namespace {

void check_bits(int bits) {
  if (bits < 1 || bits > 32) {
    throw QuantizationError("quantizer resolution must be in [1, 32] bits, got " +
                            std::to_string(bits));
  }
}

// Smallest float not below r, so the transmitted range still covers every
// difference.
double round_up_to_float(double r) {
  float f = static_cast<float>(r);
  if (static_cast<double>(f) < r) f = std::nextafter(f, std::numeric_limits<float>::infinity());
  return static_cast<double>(f);
}

}  // namespace

QuantState::QuantState(Index dim, int bits, std::uint64_t seed, std::uint64_t stream)
    : prev_hat_(VectorXd::Zero(dim)), bits_(bits) {
  check_bits(bits);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  engine_.seed(seq);
}

QuantMsg encode(const VectorXd& y, QuantState& state) {
  check_bits(state.bits());
  require_dim(y.size(), state.prev_hat().size(), "encode");
  if (!y.allFinite()) throw QuantizationError("encode: non-finite input");

  const VectorXd diff = y - state.prev_hat();
  const double top = static_cast<double>(max_level(state.bits()));

  QuantMsg msg;
  msg.bits = state.bits();
  msg.levels.assign(static_cast<std::size_t>(y.size()), 0u);
  const double max_diff = diff.size() ? diff.cwiseAbs().maxCoeff() : 0.0;
  msg.range = round_up_to_float(max_diff);
  if (!std::isfinite(msg.range)) throw QuantizationError("encode: range overflows float");

  // (diff + R) / step written as (diff + R) * top / 2R, so the range end
  // maps to exactly the top level.
  const double span = 2.0 * msg.range;
  for (Index j = 0; j < diff.size(); ++j) {
    const double u = state.next_uniform();
    if (msg.range == 0.0) continue;
    const double c = std::clamp((diff(j) + msg.range) * top / span, 0.0, top);
    const double lower = std::floor(c);
    const double q = (u < c - lower) ? lower + 1.0 : lower;
    msg.levels[static_cast<std::size_t>(j)] = static_cast<std::uint32_t>(std::min(q, top));
  }
  state.set_prev_hat(decode(msg, state.prev_hat()));
  return msg;
}

VectorXd decode(const QuantMsg& msg, const VectorXd& prev_hat) {
  check_bits(msg.bits);
  require_dim(msg.dim(), prev_hat.size(), "decode");
  const std::uint32_t top = max_level(msg.bits);
  if (msg.range == 0.0) return prev_hat;
  const double step = step_size(msg.range, msg.bits);
  VectorXd out(prev_hat.size());
  for (Index j = 0; j < out.size(); ++j) {
    const std::uint32_t q = msg.levels[static_cast<std::size_t>(j)];
    if (q > top) {
      throw QuantizationError("decode: level " + std::to_string(q) + " outside [0, " +
                              std::to_string(top) + "]");
    }
    out(j) = prev_hat(j) + step * static_cast<double>(q) - msg.range;
  }
  return out;
}

std::uint64_t payload_bits(const QuantMsg& msg, int range_bits) {
  return static_cast<std::uint64_t>(msg.bits) * static_cast<std::uint64_t>(msg.dim()) +
         static_cast<std::uint64_t>(range_bits);
}

}  // namespace fednew
