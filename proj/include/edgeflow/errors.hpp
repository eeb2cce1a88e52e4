// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace edgeflow {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class CycleError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ShapeMismatchError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

class UnsupportedPatternError : public Error {
public:
    using Error::Error;
};

class InfeasibleSplitError : public Error {
public:
    using Error::Error;
};

// Memory pool signals. OutOfSharedMemory is consumed by the planner as a
// DDR spill, not treated as fatal.
class CapacityExceededError : public Error {
public:
    using Error::Error;
};

class OutOfSharedMemoryError : public Error {
public:
    using Error::Error;
};

class DoubleFreeError : public Error {
public:
    using Error::Error;
};

class PlanValidationError : public Error {
public:
    using Error::Error;
};

class EquivalenceFailureError : public Error {
public:
    using Error::Error;
};

class InvalidDimensionError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

} // namespace edgeflow
