// common.h
// Shared error-checking and small utilities.
#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace pcgl {

// Throws std::runtime_error; message is only built when the check fails.
#define PCGL_CHECK(cond, msg)                                   \
    do {                                                        \
        if (!(cond)) {                                          \
            std::ostringstream oss_;                            \
            oss_ << msg;                                        \
            throw std::runtime_error(oss_.str());               \
        }                                                       \
    } while (0)

}  // namespace pcgl
