#pragma once

#include <stdexcept>
#include <string>

namespace wdsub {

/// Non-finite or structurally malformed input (NaN coordinates, shape mismatch).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A point or parameter lies outside the set on which a formula is defined.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Inconsistent run parameters (Q < 1, grid too coarse, empty sampling slice).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace wdsub
