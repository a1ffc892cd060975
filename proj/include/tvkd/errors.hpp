#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tvkd {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TVKD_DEFINE_ERROR(Name)          \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

TVKD_DEFINE_ERROR(InvalidArgument);
TVKD_DEFINE_ERROR(TerminalStateError);
TVKD_DEFINE_ERROR(InvalidToken);
TVKD_DEFINE_ERROR(SizeLimitError);
TVKD_DEFINE_ERROR(InvalidTrajectory);
TVKD_DEFINE_ERROR(NonFiniteError);
TVKD_DEFINE_ERROR(SupportError);
TVKD_DEFINE_ERROR(MissingAction);
TVKD_DEFINE_ERROR(CoverageError);
TVKD_DEFINE_ERROR(IoError);
TVKD_DEFINE_ERROR(LengthMismatch);
TVKD_DEFINE_ERROR(EmptyTrajectory);
TVKD_DEFINE_ERROR(ShapeMismatch);
TVKD_DEFINE_ERROR(DivergenceError);
TVKD_DEFINE_ERROR(EmptyDataset);
TVKD_DEFINE_ERROR(ExhaustionError);
TVKD_DEFINE_ERROR(ChecksumMismatch);

#undef TVKD_DEFINE_ERROR

/// Malformed record in a line-oriented file. `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Config file problem; `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A potential violated the zero-at-terminal requirement of the invariance harness.
class PotentialError : public Error {
 public:
  PotentialError(std::size_t state, const std::string& what)
      : Error(what), state_(state) {}
  std::size_t state() const noexcept { return state_; }

 private:
  std::size_t state_;
};

}  // namespace tvkd
