#pragma once

#include <stdexcept>
#include <string>

namespace fedgeo {

// Invalid or inconsistent experiment configuration. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset files missing, malformed or inconsistent. Maps to CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf detected in parameters or divergences. Maps to CLI exit code 4.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fedgeo
