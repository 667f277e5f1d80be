#pragma once

#include <cstddef>
#include <optional>

#include "sdsim/protocol.hpp"

namespace sdsim {

// Earliest step (1-based) at which any item is classified as `cls`.
std::optional<int> first_onset(const TrajectoryRecord& traj, ResponseClass cls);

// Counted events with an explicit no-samples state; a rate of 0 and "no
// events at all" are different outcomes.
struct EventRate {
  std::size_t samples = 0;
  std::size_t hits = 0;

  std::optional<double> rate() const {
    if (samples == 0) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(samples);
  }
};

// Among category-coordinate and cross-category responses on low-frequency
// items (freq below the maximum), the fraction decoded to a strictly more
// frequent item. The dataset must carry the non-uniform frequencies the
// trajectory was relearned under; a uniform dataset is rejected.
EventRate prototyping_rate(const TrajectoryRecord& traj, const Dataset& ds);

// Control statistic for uniform-frequency runs: items are designated low/high
// by the given weight vector while training saw uniform exposure. Every
// non-correct response of a designated-low item is force-decoded from its
// output snapshot; a hit is a decode landing on a designated-higher item.
EventRate forced_decode_rate(const TrajectoryRecord& traj, const Dataset& ds,
                             const Vector& designation);

}  // namespace sdsim
