#pragma once

#include <stdexcept>
#include <string>

namespace hdnet {

enum class ErrorKind {
  Dimension,
  Contract,
  DegenerateMask,
  Io,
  Config,
  Version,
  Numeric,
  Generation,
};

// Base of every exception the library throws. The kind maps one-to-one onto
// the C API status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error(ErrorKind::Dimension, w) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& w) : Error(ErrorKind::Contract, w) {}
};
struct DegenerateMaskError : Error {
  explicit DegenerateMaskError(const std::string& w)
      : Error(ErrorKind::DegenerateMask, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};
struct VersionError : Error {
  explicit VersionError(const std::string& w) : Error(ErrorKind::Version, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::Numeric, w) {}
};
struct GenerationError : Error {
  explicit GenerationError(const std::string& w) : Error(ErrorKind::Generation, w) {}
};

// Carries the 1-based line of the offending config entry (0 when unknown).
class ConfigError : public Error {
 public:
  ConfigError(const std::string& w, int line)
      : Error(ErrorKind::Config, line > 0 ? "line " + std::to_string(line) + ": " + w : w),
        detail_(w),
        line_(line) {}
  int line() const noexcept { return line_; }
  // Message without the line prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  int line_;
};

}  // namespace hdnet
