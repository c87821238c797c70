#pragma once
// SPDX-License-Identifier: Apache-2.0

#include <stdexcept>
#include <string>

namespace akl {

/// Caller-supplied value violates a precondition.
class invalid_input : public std::invalid_argument {
 public:
  explicit invalid_input(const std::string& what) : std::invalid_argument(what) {}
};

/// A brute-force routine was asked to enumerate past its size cap.
class size_limit_exceeded : public invalid_input {
 public:
  explicit size_limit_exceeded(const std::string& what) : invalid_input(what) {}
};

/// Internal consistency check failed; indicates a bug, not bad input.
class internal_error : public std::logic_error {
 public:
  explicit internal_error(const std::string& what) : std::logic_error(what) {}
};

/// A verification oracle could not evaluate the quantity it probes
/// (e.g. a loss evaluation produced a non-finite value).
class oracle_failure : public std::runtime_error {
 public:
  explicit oracle_failure(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem or stream failure while emitting or reading results.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure inside a training loop, annotated with the epoch.
class training_failure : public std::runtime_error {
 public:
  training_failure(int epoch, const std::string& what)
      : std::runtime_error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace akl
