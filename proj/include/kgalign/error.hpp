#pragma once
// Error types. The CLI maps each family onto an exit code.

#include <stdexcept>
#include <string>

namespace kgalign {

// Bad input data: missing files, malformed lines, dangling references.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or parameter combination.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Annotator backend failures (transport, protocol).
class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when an annotate call is attempted with no budget left.
class BudgetExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace kgalign
