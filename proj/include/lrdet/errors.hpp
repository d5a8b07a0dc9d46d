#pragma once

#include <stdexcept>
#include <string>

namespace lrdet {

// Caller violated an operation's contract (bad shape, out-of-range index...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Reading or writing a dataset, checkpoint or report failed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A trained artifact does not fit the model it is used with.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LRDET_REQUIRE(cond, msg)                  \
  do {                                            \
    if (!(cond)) throw ::lrdet::PreconditionError(msg); \
  } while (0)

}  // namespace lrdet
