#pragma once

namespace sdsim {

inline constexpr const char* kToolVersion = "sdsim 0.1.0";

}  // namespace sdsim
