#pragma once

#include <stdexcept>
#include <string>

namespace beamtrack {

/// File and format failures; the CLI maps these to a distinct exit code.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace beamtrack
