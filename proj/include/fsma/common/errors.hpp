#pragma once

#include <stdexcept>
#include <string>

namespace fsma {

/// Input or configuration that violates a documented contract. Raised before
/// any side effect takes place; the CLI maps it to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Failure while carrying out a valid request (I/O, training). CLI exit code 3.
class RuntimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fsma
