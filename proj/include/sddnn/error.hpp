#pragma once

#include <stdexcept>
#include <string>

namespace sddnn {

/// Invalid configuration: bad shapes, rates, partition layouts, missing prerequisites.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent input data.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// Broken internal contract (stale activations, misaligned gradients, lineage violations).
class InternalError : public std::logic_error {
public:
    explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace sddnn
