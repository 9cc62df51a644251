#pragma once

#include <stdexcept>
#include <string>

namespace curemc3 {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Numerical/model-support failures.
class NumericError : public Error
{
public:
    using Error::Error;
};

class InvalidBase : public NumericError
{
public:
    using NumericError::NumericError;
};

class DegenerateSusceptibles : public NumericError
{
public:
    using NumericError::NumericError;
};

class DegenerateSurvival : public NumericError
{
public:
    using NumericError::NumericError;
};

class DomainError : public NumericError
{
public:
    using NumericError::NumericError;
};

class GradientUnavailable : public NumericError
{
public:
    using NumericError::NumericError;
};

class InsufficientSamples : public NumericError
{
public:
    using NumericError::NumericError;
};

class GeneratorError : public NumericError
{
public:
    using NumericError::NumericError;
};

// Configuration and registration.
class ConfigError : public Error
{
public:
    using Error::Error;
};

class RegistrationError : public ConfigError
{
public:
    using ConfigError::ConfigError;
};

// Input data problems.
class DataError : public Error
{
public:
    using Error::Error;
};

class ParseError : public DataError
{
public:
    ParseError(const std::string& what, std::size_t row, std::string column)
        : DataError(what), row_(row), column_(std::move(column))
    {
    }
    explicit ParseError(const std::string& what) : DataError(what) {}

    /// 1-based data row (header excluded); 0 when not tied to a row.
    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_ = 0;
    std::string column_;
};

class EmptyDataset : public DataError
{
public:
    using DataError::DataError;
};

class SchemaMismatch : public DataError
{
public:
    using DataError::DataError;
};

class UnseenLevel : public SchemaMismatch
{
public:
    using SchemaMismatch::SchemaMismatch;
};

}  // namespace curemc3
