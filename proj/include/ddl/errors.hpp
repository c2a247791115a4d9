#pragma once

#include <stdexcept>

namespace ddl {

// Bad input: unknown catalog id, parameter out of range, violated precondition.
struct validation_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Refused computation: integer overflow, memory budget, a table that does not
// cover the request.
struct resource_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ddl
