#pragma once

#include <stdexcept>
#include <string>

namespace petkin {

// Bad input, bad configuration, or unreadable/unwritable files. CLI exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string &what) : std::runtime_error(what) {}
};

// A computation that cannot produce a meaningful result. CLI exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string &what) : std::runtime_error(what) {}
};

} // namespace petkin
