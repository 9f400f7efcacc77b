#pragma once

#include <stdexcept>

namespace pgsum {

/// Bad or unreadable input data: corpus files, checkpoints, vocabularies.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid invocation or configuration.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace pgsum
