#pragma once

#include <stdexcept>
#include <string>

namespace simulstop {

enum class ErrorCode {
  Config,
  InvalidArgument,
  Numeric,
  BudgetExceeded,
  HorizonExceeded,
  UnsupportedScenario,
  UndefinedConditional,
  Io,
};

// Every failure raised by the library derives from this.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

  // Config-like failures map to CLI exit code 2, the rest to 3.
  bool is_config_error() const noexcept {
    return code_ == ErrorCode::Config || code_ == ErrorCode::InvalidArgument ||
           code_ == ErrorCode::UnsupportedScenario || code_ == ErrorCode::Io;
  }

 private:
  ErrorCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::Config, what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorCode::InvalidArgument, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCode::Numeric, what) {}
};

class HorizonExceeded : public Error {
 public:
  explicit HorizonExceeded(const std::string& what) : Error(ErrorCode::HorizonExceeded, what) {}
};

class UnsupportedScenario : public Error {
 public:
  explicit UnsupportedScenario(const std::string& what) : Error(ErrorCode::UnsupportedScenario, what) {}
};

class UndefinedConditional : public Error {
 public:
  explicit UndefinedConditional(const std::string& what) : Error(ErrorCode::UndefinedConditional, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::Io, what) {}
};

}  // namespace simulstop
