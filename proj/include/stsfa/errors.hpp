#pragma once

#include <stdexcept>
#include <string>

namespace stsfa {

/// Malformed user input: unreadable files, bad schemas, invalid flags,
/// unbalanced panels, out-of-range configuration.
struct input_error : std::runtime_error {
    explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Data and weight matrix do not refer to the same units in the same order.
struct alignment_error : std::runtime_error {
    explicit alignment_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A computation left the representable/admissible domain, e.g. a likelihood
/// that is not finite at the starting point.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace stsfa
