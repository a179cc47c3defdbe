#pragma once

#include <stdexcept>
#include <string>

namespace mehfest {

enum class ErrorKind {
  InvalidArgument,
  FileNotFound,
  Io,
  UnsupportedFormat,
  EmptyData,
  TooShort,
  Infeasible,
  Parse,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers switch on kind() when they
// need to map failures onto exit codes or error rows.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mehfest
