#pragma once

#include <stdexcept>
#include <string>

namespace cfl {

// Invalid configuration or infeasible request. CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File ingestion / emission failure. CLI exit code 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Math-domain failure (zero vector where a direction is required, etc).
// CLI exit code 4.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cfl
