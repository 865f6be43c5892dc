#pragma once

#include <stdexcept>
#include <string>

namespace flavoraxis {

// Malformed or inconsistent input data. The CLI maps this to exit status 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on arguments was violated (empty group, k >= n, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A remote or recorded provider failed to answer. `retryable` is false when
// asking again cannot help (missing fixture, malformed reply).
class ProviderError : public std::runtime_error {
 public:
  explicit ProviderError(const std::string& what, bool retryable = true)
      : std::runtime_error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

// A user-supplied statistic failed inside a resampling loop.
class ResamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flavoraxis
