#pragma once

#include <stdexcept>
#include <string>

namespace laserlock {

/// Raised when an input violates a documented invariant. `key()` names the
/// offending field using the scenario-file path (e.g. "cavity.linewidth").
class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string key, const std::string& what)
        : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Numerical failure inside a running simulation (non-finite state).
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File-system or stream failure while reading or writing artifacts.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const char* key, const std::string& what) {
    if (!ok) throw ValidationError(key, what);
}

} // namespace detail
} // namespace laserlock
