#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>

namespace mgccn {

// Malformed or inconsistent input data (missing files, bad indices, ragged rows).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes that do not agree.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite values during training or evaluation.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration values or arguments.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

using WarningHandler = std::function<void(const std::string&)>;

inline WarningHandler& warning_handler() {
  static WarningHandler handler = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return handler;
}

inline void warn(const std::string& msg) {
  if (warning_handler()) warning_handler()(msg);
}

// Swaps the process-wide warning sink for the lifetime of the guard.
class ScopedWarningHandler {
 public:
  explicit ScopedWarningHandler(WarningHandler h) : saved_(warning_handler()) {
    warning_handler() = std::move(h);
  }
  ~ScopedWarningHandler() { warning_handler() = std::move(saved_); }
  ScopedWarningHandler(const ScopedWarningHandler&) = delete;
  ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;

 private:
  WarningHandler saved_;
};

}  // namespace mgccn
