#pragma once

#include <stdexcept>
#include <string>

namespace transcap {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes of two operands do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input rejected by a documented precondition (asymmetric Hessian, bad spectrum, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Divergence, instability or loss of positive definiteness during a computation.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Configuration could not be parsed or failed validation. `field` names the
/// offending key path (e.g. "rule.step_size"), empty when not attributable.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace transcap
