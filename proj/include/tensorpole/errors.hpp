#pragma once

#include <stdexcept>
#include <string>

namespace tensorpole {

// Bad user input: unknown names, out-of-range grids, invalid specs.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A computation that cannot produce a trustworthy number.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateSpectrumError : NumericalError {
    using NumericalError::NumericalError;
};

}  // namespace tensorpole
