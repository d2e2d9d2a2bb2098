#pragma once

#include <stdexcept>
#include <string>

namespace beampomdp {

/// Invalid user input. `field()` holds the dotted path of the offending
/// config entry (e.g. "detection.epsilon"), or is empty for non-config input.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(field.empty() ? message : field + ": " + message),
          field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// A computed quantity violated an invariant that valid inputs guarantee.
class InternalConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Bayes update was asked to condition on an observation of probability zero.
class ImpossibleObservation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace beampomdp
