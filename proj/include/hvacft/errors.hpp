#pragma once
// Error taxonomy used across the toolkit.  Every failure mode maps to one of
// these categories so callers (and the CLI) can translate them into exit codes.

#include <stdexcept>
#include <string>

namespace hvacft {

// Shape or wiring mismatch: tensor dims, layer chains, window sizes.
struct StructuralError : std::runtime_error {
    explicit StructuralError(const std::string& what) : std::runtime_error(what) {}
};

// Bad user-supplied configuration (missing field, out-of-range value, missing file).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite or exploding numerics detected at a guard point.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed external input (CSV schema, out-of-range column, bad checkpoint).
struct InputError : std::runtime_error {
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Training-time failure: diverging loss, non-finite gradients.
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

// Least-squares identification failure (rank deficiency, degenerate columns).
struct IdentificationError : std::runtime_error {
    explicit IdentificationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hvacft
