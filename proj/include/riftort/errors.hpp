#pragma once

#include <stdexcept>
#include <string>

namespace riftort {

// Construction-time validation failures (bad parameters, malformed config
// strings, dimension mismatches).  Thrown before any expensive work starts.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Runtime numerical failures: singular systems without regularization,
// divergent line searches, non-finite values showing up mid-computation.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace riftort
