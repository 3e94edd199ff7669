#pragma once

#include <stdexcept>
#include <string>

namespace retav {

/// Data-level failure: unreadable file, malformed format, mismatched inputs.
/// Parameter-contract violations throw std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace retav
