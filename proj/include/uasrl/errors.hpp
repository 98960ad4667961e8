#pragma once

#include <stdexcept>
#include <string>

namespace uasrl {

// Violated precondition / misuse of an API contract.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

// NaN/Inf or other numerical failure; the message names the offending op.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid experiment/environment configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace uasrl
