#pragma once

#include <stdexcept>
#include <string>

namespace scalpnet {

// Single error type for all pipeline failures. Messages are lowercase,
// self-contained, and safe to show on the CLI error stream.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace scalpnet
