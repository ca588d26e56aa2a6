#pragma once

#include <stdexcept>
#include <string>

namespace paneliv {

// Invalid request: bad column roles, malformed options, impossible settings.
// CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Input data violates a documented precondition (unbalanced panel, negative
// counts, absent cells where values are required).  CLI exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Estimation failed: singular system, non-convergence, degenerate variance.
// CLI exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace paneliv
