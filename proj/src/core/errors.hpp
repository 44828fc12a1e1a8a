#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace braintools {

// Error categories. The numeric values are shared with the C API status codes.
enum class ErrorKind : int {
  Input = 1,
  Format = 2,
  Data = 3,
  Manifest = 4,
  Coverage = 5,
  Degenerate = 6,
  Roi = 7,
  Config = 8,
  Stage = 9,
  Io = 10,
  NullImpact = 11,
  DegenerateTest = 12,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define BRAINTOOLS_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                                \
   public:                                                                   \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

BRAINTOOLS_DEFINE_ERROR(InputError, Input)
BRAINTOOLS_DEFINE_ERROR(FormatError, Format)
BRAINTOOLS_DEFINE_ERROR(ManifestError, Manifest)
BRAINTOOLS_DEFINE_ERROR(CoverageError, Coverage)
BRAINTOOLS_DEFINE_ERROR(DegenerateError, Degenerate)
BRAINTOOLS_DEFINE_ERROR(RoiError, Roi)
BRAINTOOLS_DEFINE_ERROR(ConfigError, Config)
BRAINTOOLS_DEFINE_ERROR(StageError, Stage)
BRAINTOOLS_DEFINE_ERROR(IoError, Io)

#undef BRAINTOOLS_DEFINE_ERROR

// Non-finite value in a loaded tensor. `index` is the C-order multi-index of
// the first offending element.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::vector<std::size_t> index = {})
      : Error(ErrorKind::Data, what), index_(std::move(index)) {}
  const std::vector<std::size_t>& index() const noexcept { return index_; }

 private:
  std::vector<std::size_t> index_;
};

// Throws the concrete error class for `kind`, so that callers can add context
// to a caught Error without losing its type.
[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& what) {
  switch (kind) {
    case ErrorKind::Input: throw InputError(what);
    case ErrorKind::Format: throw FormatError(what);
    case ErrorKind::Data: throw DataError(what);
    case ErrorKind::Manifest: throw ManifestError(what);
    case ErrorKind::Coverage: throw CoverageError(what);
    case ErrorKind::Degenerate: throw DegenerateError(what);
    case ErrorKind::Roi: throw RoiError(what);
    case ErrorKind::Config: throw ConfigError(what);
    case ErrorKind::Stage: throw StageError(what);
    case ErrorKind::Io: throw IoError(what);
    default: throw Error(kind, what);
  }
}

}  // namespace braintools
