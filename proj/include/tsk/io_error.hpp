#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsk {

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FormatErrorKind { bad_magic, bad_version, truncated, invalid };

std::string_view to_string(FormatErrorKind kind);

/// A file was readable but its contents are not a valid encoding.
class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace tsk
