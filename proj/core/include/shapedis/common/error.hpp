#pragma once

#include <stdexcept>
#include <string>

namespace shapedis {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input data violates an operation's precondition (empty mesh, bad shapes, ...).
class InputError : public Error {
public:
    using Error::Error;
};

/// A required upstream artifact is missing or its hash does not match.
class DependencyError : public Error {
public:
    using Error::Error;
};

/// An immutability or ownership contract was broken (e.g. frozen renderer mutated).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Non-finite values appeared during optimization.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed file on disk.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace shapedis
