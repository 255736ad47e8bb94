#pragma once

#include <stdexcept>
#include <string>

namespace morphkit {

// Invalid inputs or configuration. CLI exit code 2.
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A backend cannot provide a requested capability (missing checkpoint,
// unsupported kind/dtype/device). CLI exit code 3.
class capability_error : public std::runtime_error {
public:
    explicit capability_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure at runtime: non-finite tensors, diverging losses,
// exhausted searches. CLI exit code 4.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace morphkit
