#pragma once

#include <stdexcept>
#include <string>

namespace fame {

// Error taxonomy mirroring the CLI exit-code protocol: configuration-class
// misuse, unreadable or malformed data, and numerical failures are kept
// distinct so main() can map them to exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };  // shape/axis mismatch
struct ContractError : Error { using Error::Error; };   // precondition violated
struct ConfigError : Error { using Error::Error; };     // bad configuration value
struct DataError : Error { using Error::Error; };       // bad file or dataset
struct NumericError : Error { using Error::Error; };    // NaN/Inf or oracle failure

}  // namespace fame
