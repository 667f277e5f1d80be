#include "sdsim/trajectory_stats.hpp"

#include "sdsim/errors.hpp"

namespace sdsim {

std::optional<int> first_onset(const TrajectoryRecord& traj,
                               ResponseClass cls) {
  for (const auto& rec : traj.steps)
    for (const auto& r : rec.responses)
      if (r.cls == cls) return rec.step;
  return std::nullopt;
}

EventRate prototyping_rate(const TrajectoryRecord& traj, const Dataset& ds) {
  const double max_freq = ds.freq.maxCoeff();
  if (ds.freq.minCoeff() == max_freq)
    throw std::invalid_argument(
        "prototyping rate is undefined for uniform frequencies");

  EventRate rate;
  for (const auto& rec : traj.steps) {
    for (std::size_t p = 0; p < rec.responses.size(); ++p) {
      if (ds.freq(static_cast<Eigen::Index>(p)) >= max_freq) continue;
      const auto& r = rec.responses[p];
      if (r.cls != ResponseClass::CategoryCoordinate &&
          r.cls != ResponseClass::CrossCategory)
        continue;
      ++rate.samples;
      if (ds.freq(*r.decoded_item) > ds.freq(static_cast<Eigen::Index>(p)))
        ++rate.hits;
    }
  }
  return rate;
}

EventRate forced_decode_rate(const TrajectoryRecord& traj, const Dataset& ds,
                             const Vector& designation) {
  if (designation.size() != ds.items())
    throw std::invalid_argument("designation length does not match item count");
  const double max_weight = designation.maxCoeff();
  if (designation.minCoeff() == max_weight)
    throw std::invalid_argument("designation must separate low and high items");

  EventRate rate;
  for (const auto& rec : traj.steps) {
    for (std::size_t p = 0; p < rec.responses.size(); ++p) {
      if (designation(static_cast<Eigen::Index>(p)) >= max_weight) continue;
      if (rec.responses[p].cls == ResponseClass::Correct) continue;
      ++rate.samples;
      const int decoded =
          decode_item(rec.yhat.col(static_cast<Eigen::Index>(p)), ds);
      if (designation(decoded) > designation(static_cast<Eigen::Index>(p)))
        ++rate.hits;
    }
  }
  return rate;
}

}  // namespace sdsim
