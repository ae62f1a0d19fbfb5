#pragma once

#include <stdexcept>
#include <string>

namespace slogan {

/// Base class for every error raised by the library. Messages name the
/// offending value (shape, file, parameter, key) so the CLI can print them as-is.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace slogan
