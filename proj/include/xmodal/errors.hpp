#pragma once

#include <stdexcept>

namespace xmodal {

// Raised when a computation produced bad numbers (non-finite loss or
// gradient, failed tolerance) as opposed to bad inputs. The CLI maps this to
// exit code 3, everything else to 2.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace xmodal
