#ifndef DIPDEF_ERRORS_HPP
#define DIPDEF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dipdef {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad or inconsistent configuration values.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed runtime input (shape mismatch, empty batch, unreadable file).
struct InputError : Error {
    using Error::Error;
};

// An operation was requested from a component that cannot provide it,
// e.g. gradients from a non-differentiable classifier adapter.
struct CapabilityError : Error {
    using Error::Error;
};

}  // namespace dipdef

#endif
