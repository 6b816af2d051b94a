#pragma once

#include <stdexcept>
#include <string>

namespace supercorr {

// Emitter count exceeds what the exact solver is allowed to attempt.
struct capacity_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input-file problems; the message names the offending line.
struct parse_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace supercorr
