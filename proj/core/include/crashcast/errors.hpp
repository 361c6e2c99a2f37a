#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crashcast {

// Base of every error this library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input files, bad flags, violated file-format contracts. Exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

class EmptyFileError : public InputError {
public:
    explicit EmptyFileError(const std::string& what) : InputError(what) {}
};

class MissingColumnError : public InputError {
public:
    explicit MissingColumnError(const std::string& column)
        : InputError("missing column: " + column), column(column) {}
    std::string column;
};

class MalformedRowError : public InputError {
public:
    MalformedRowError(std::size_t line, const std::string& reason)
        : InputError("line " + std::to_string(line) + ": " + reason), line(line), reason(reason) {}
    std::size_t line;
    std::string reason;
};

class MissingWeatherError : public InputError {
public:
    explicit MissingWeatherError(const std::string& date)
        : InputError("no weather record for date " + date), date(date) {}
    std::string date;
};

// Versioned-container violations (model files, dataset files). Carries the offending line.
class FormatError : public InputError {
public:
    FormatError(std::size_t line, const std::string& reason)
        : InputError("line " + std::to_string(line) + ": " + reason), line(line) {}
    std::size_t line;
};

class ClassTooSmallError : public InputError {
public:
    using InputError::InputError;
};

class DegenerateTargetError : public InputError {
public:
    using InputError::InputError;
};

class DimensionMismatchError : public Error {
public:
    using Error::Error;
};

class FeatureMismatchError : public Error {
public:
    using Error::Error;
};

class LengthMismatchError : public Error {
public:
    using Error::Error;
};

class EmptyAfterPoolError : public Error {
public:
    using Error::Error;
};

class SingleClassError : public Error {
public:
    using Error::Error;
};

// Numeric failures during training. Exit code 3.
class NumericError : public Error {
public:
    using Error::Error;
};

class NonFiniteLossError : public NumericError {
public:
    explicit NonFiniteLossError(std::size_t epoch)
        : NumericError("non-finite training loss at epoch " + std::to_string(epoch)), epoch(epoch) {}
    std::size_t epoch;
};

// Generator spec cannot be satisfied. Exit code 4.
class SpecInfeasibleError : public Error {
public:
    using Error::Error;
};

class BoundViolationError : public Error {
public:
    using Error::Error;
};

} // namespace crashcast
