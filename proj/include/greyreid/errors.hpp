#ifndef GREYREID_ERRORS_HPP_
#define GREYREID_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace greyreid {

// Invalid or inconsistent configuration (bad override key, schedule, P > #ids ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Problems with input data: missing files, malformed manifests, undecodable images.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values during training or loss evaluation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Corrupted, truncated or incompatible checkpoint / feature files.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shape or dimension contract violated.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace greyreid

#endif  // GREYREID_ERRORS_HPP_
