#pragma once

#include <stdexcept>
#include <string>

namespace sdsim {

// Invalid user-facing configuration (bad config file, bad tree/network
// parameters). Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fault while executing an otherwise valid experiment (training divergence,
// non-finite weights, unreadable state files). Maps to CLI exit code 2.
class RuntimeFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sdsim
