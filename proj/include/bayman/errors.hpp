#pragma once

#include <stdexcept>

namespace bayman {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bayman
