// Exception hierarchy used across the library. The C API maps each type
// to a distinct status code.
#pragma once

#include <stdexcept>
#include <string>

namespace lvt {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes are inconsistent with each other or with a ConvSpec.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A numeric postcondition was violated (non-finite value, empty simplex sum).
class ValueError : public Error {
 public:
  using Error::Error;
};

// Invalid model configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure (open/read/write).
class IoError : public Error {
 public:
  using Error::Error;
};

// Structurally invalid weight file (magic, version, truncation, dtype).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Weight file payload failed its CRC check.
class ChecksumError : public Error {
 public:
  using Error::Error;
};

}  // namespace lvt
