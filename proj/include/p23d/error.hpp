#pragma once

#include <stdexcept>
#include <string>

namespace p23d {

// Exit-code categories used by the CLI: 1 usage, 2 data, 3 numeric.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
  static constexpr int kExitCode = 1;
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
  static constexpr int kExitCode = 2;
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
  static constexpr int kExitCode = 3;
};

}  // namespace p23d
