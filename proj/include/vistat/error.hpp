#pragma once

#include <stdexcept>
#include <string>

namespace vistat {

/// Broad failure classes. The CLI maps them onto process exit codes.
enum class ErrorKind {
  Input,     // malformed files, schema problems, bad arguments (exit 2)
  Domain,    // degenerate or undefined mathematics (exit 3)
  Internal,  // invariant violated inside the library (exit 4)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct SchemaError : Error {
  explicit SchemaError(const std::string& w) : Error(ErrorKind::Input, w) {}
};

struct ParseError : Error {
  ParseError(const std::string& w, std::size_t line)
      : Error(ErrorKind::Input, "line " + std::to_string(line) + ": " + w),
        line(line) {}
  std::size_t line;
};

struct DuplicateError : Error {
  explicit DuplicateError(const std::string& w) : Error(ErrorKind::Input, w) {}
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& w) : Error(ErrorKind::Input, w) {}
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error(ErrorKind::Input, w) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::Input, w) {}
};

/// Undefined statistics: zero variance, constant windows, zero denominators.
struct DegenerateError : Error {
  explicit DegenerateError(const std::string& w) : Error(ErrorKind::Domain, w) {}
};

struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(ErrorKind::Domain, w) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& w) : Error(ErrorKind::Domain, w) {}
};

struct InvariantError : Error {
  explicit InvariantError(const std::string& w) : Error(ErrorKind::Internal, w) {}
};

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Input: return 2;
    case ErrorKind::Domain: return 3;
    case ErrorKind::Internal: return 4;
  }
  return 4;
}

}  // namespace vistat
