#pragma once

#include <stdexcept>
#include <string>

namespace semcex {

/// Base class for every error raised by the library. `code()` is a stable,
/// machine-readable identifier that the command-line tool forwards verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Two parameter vectors that do not share the same group layout.
class StructuralError : public Error {
 public:
  explicit StructuralError(const std::string& what) : Error("structural_error", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

class DegenerateGeometryError : public Error {
 public:
  explicit DegenerateGeometryError(const std::string& what)
      : Error("degenerate_geometry", what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension_mismatch", what) {}
};

/// Input value outside the domain of an operation (NaN logits, label >= L, ...).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error("domain_error", what) {}
};

class MissingInputError : public Error {
 public:
  explicit MissingInputError(const std::string& path)
      : Error("missing_input", "missing input: " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io_error", what) {}
};

}  // namespace semcex
