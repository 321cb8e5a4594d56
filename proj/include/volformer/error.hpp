#pragma once

#include <stdexcept>
#include <string>

namespace volformer {

enum class ErrorKind {
  dimension,
  numeric,
  config,
  data,
  format,
  usage,
  io,
  mismatch,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define VOLFORMER_DEFINE_ERROR(Name, Kind)                               \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

VOLFORMER_DEFINE_ERROR(DimensionError, dimension)
VOLFORMER_DEFINE_ERROR(NumericError, numeric)
VOLFORMER_DEFINE_ERROR(ConfigError, config)
VOLFORMER_DEFINE_ERROR(DataError, data)
VOLFORMER_DEFINE_ERROR(UsageError, usage)
VOLFORMER_DEFINE_ERROR(IoError, io)

#undef VOLFORMER_DEFINE_ERROR

// Malformed binary container. Carries the byte offset at which parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(ErrorKind::format, what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// A checkpoint that does not fit the requested configuration. `array` names
// the first offending parameter array (or config field).
class MismatchError : public Error {
 public:
  MismatchError(const std::string& array, const std::string& what)
      : Error(ErrorKind::mismatch, what), array_(array) {}

  const std::string& array() const noexcept { return array_; }

 private:
  std::string array_;
};

}  // namespace volformer
