#pragma once

#include <cmath>
#include <string>

#include "cfstack/error.hpp"

namespace cfstack {

/// Triangular cyclical learning rate whose amplitude halves every cycle.
struct LRSchedule {
  double base_lr = 1e-5;
  double max_lr = 1e-3;
  int step_size = 4;  // epochs per half-cycle

  void validate() const {
    if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw PreconditionError("base_lr must be > 0");
    if (!(max_lr > base_lr) || !std::isfinite(max_lr)) {
      throw PreconditionError("max_lr must exceed base_lr");
    }
    if (step_size < 1) throw PreconditionError("step_size must be >= 1");
  }

  friend bool operator==(const LRSchedule&, const LRSchedule&) = default;
};

/// Amplitude multiplier for 1-based cycle c: 1 / 2^(c-1).
inline double cycle_scale(long cycle) { return std::ldexp(1.0, -static_cast<int>(cycle - 1)); }

/// Learning rate for a 0-based epoch.
inline double lr_at(const LRSchedule& s, long epoch) {
  if (epoch < 0) throw PreconditionError("epoch must be >= 0");
  const long cycle = epoch / (2L * s.step_size) + 1;
  const double x = std::abs(static_cast<double>(epoch) / s.step_size - 2.0 * cycle + 1.0);
  const double ramp = x < 1.0 ? 1.0 - x : 0.0;
  return s.base_lr + (s.max_lr - s.base_lr) * ramp * cycle_scale(cycle);
}

}  // namespace cfstack
