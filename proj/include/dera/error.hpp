#pragma once

#include <stdexcept>
#include <string>

namespace dera {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

/// Majority vote or vote distribution over zero completions.
class EmptyBallot : public Error {
 public:
  EmptyBallot() : Error("vote over an empty ballot") {}
};

}  // namespace dera
