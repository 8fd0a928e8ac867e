// SPDX-License-Identifier: MIT
/**
 * Error types shared by the library.  ValidationError signals bad input
 * (the CLI maps it to exit status 2); RuntimeError signals a failure while
 * computing (exit status 3).
 */
#pragma once

#include <stdexcept>
#include <string>

namespace rbbm {

struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct RuntimeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

} // namespace rbbm
