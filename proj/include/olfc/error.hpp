#pragma once

#include <stdexcept>
#include <string>

namespace olfc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data. `path()` names the offending field when known, in the
/// dotted form used by scenario files ("network.lines[3].to").
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message, std::string path = {})
      : Error(path.empty() ? message : path + ": " + message),
        path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// A graph (physical or communication) is not connected.
class DisconnectedGraphError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// No steady state was found at the requested operating point.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace olfc
