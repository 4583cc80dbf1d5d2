#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lazyla {

enum class ErrorCategory {
  Configuration,
  Conformability,
  Bounds,
  Resource,
  Contract,
  Singularity,
  NotPositiveDefinite,
  Parse,
};

const char* to_string(ErrorCategory category) noexcept;

// Every public error carries its category; what() is prefixed with the
// category name, e.g. "conformability error: ...".
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message);

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigurationError : public Error {
 public:
  explicit ConfigurationError(const std::string& message)
      : Error(ErrorCategory::Configuration, message) {}
};

class ConformabilityError : public Error {
 public:
  explicit ConformabilityError(const std::string& message)
      : Error(ErrorCategory::Conformability, message) {}
};

class BoundsError : public Error {
 public:
  explicit BoundsError(const std::string& message)
      : Error(ErrorCategory::Bounds, message) {}
};

class ResourceError : public Error {
 public:
  ResourceError(const std::string& message, std::size_t requested_bytes)
      : Error(ErrorCategory::Resource, message), requested_bytes_(requested_bytes) {}

  std::size_t requested_bytes() const noexcept { return requested_bytes_; }

 private:
  std::size_t requested_bytes_;
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& message)
      : Error(ErrorCategory::Contract, message) {}
};

// Raised by solve/inv/trisolve on a zero pivot.
class SingularityError : public Error {
 public:
  SingularityError(const std::string& message, std::size_t pivot)
      : Error(ErrorCategory::Singularity, message), pivot_(pivot) {}

  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class NotPositiveDefiniteError : public Error {
 public:
  NotPositiveDefiniteError(const std::string& message, std::size_t pivot)
      : Error(ErrorCategory::NotPositiveDefinite, message), pivot_(pivot) {}

  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error(ErrorCategory::Parse, message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace lazyla
