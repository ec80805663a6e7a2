#pragma once

#include <stdexcept>
#include <string>

namespace surromesh {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// process exit codes (config -> 2, data/format/dimension -> 3, solver -> 4).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or size mismatch between operands.
struct DimensionError : Error {
    using Error::Error;
};

// Inconsistent or invalid configuration (model/mesh/run).
struct ConfigError : Error {
    using Error::Error;
};

// Invalid material parameters.
struct MaterialError : ConfigError {
    using ConfigError::ConfigError;
};

// Missing or malformed input data.
struct DataError : Error {
    using Error::Error;
};

// Corrupt or truncated on-disk artifacts.
struct FormatError : DataError {
    using DataError::DataError;
};

// Newton solver failed to converge (carries the last residual norm in the message).
struct SolverError : Error {
    using Error::Error;
};

// Training aborted (non-finite loss or gradient).
struct TrainingError : Error {
    using Error::Error;
};

} // namespace surromesh
