#pragma once

#include <stdexcept>
#include <string>

namespace vbgp {

// Error taxonomy shared across the library. The CLI maps these onto process
// exit codes: config/usage 2, numerical 3, I/O 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct NumericalError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct UnsupportedOperation : Error {
  using Error::Error;
};

struct TrainingDiverged : Error {
  TrainingDiverged(const std::string& msg, std::string checkpoint)
      : Error(msg), last_checkpoint(std::move(checkpoint)) {}
  std::string last_checkpoint;
};

}  // namespace vbgp
