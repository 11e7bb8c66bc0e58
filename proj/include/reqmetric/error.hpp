#pragma once

#include <stdexcept>
#include <string>

namespace reqmetric {

// Failure classes. The numeric values are the process exit codes used by the CLI.
enum class ErrorKind : int {
  kInput = 2,        // malformed or missing input files
  kBackend = 3,      // embedding backend or network failure
  kConsistency = 4,  // inputs disagree with each other (truth mismatch, mixed k, ...)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& message) : Error(ErrorKind::kInput, message) {}
};

class BackendError : public Error {
 public:
  BackendError(const std::string& message, bool retryable = false)
      : Error(ErrorKind::kBackend, message), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& message)
      : Error(ErrorKind::kConsistency, message) {}
};

// Raised when two embeddings (or an embedding and an index) disagree on dimension.
class DimensionMismatch : public ConsistencyError {
 public:
  DimensionMismatch(std::size_t expected, std::size_t actual)
      : ConsistencyError("dimension mismatch: expected " + std::to_string(expected) +
                         ", got " + std::to_string(actual)) {}
};

}  // namespace reqmetric
