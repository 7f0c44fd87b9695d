#pragma once

#include <stdexcept>
#include <string>

namespace dclogit {

// File missing / unreadable / unwritable.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Schema or content problems in input tables / configs. Carries an itemized
// list of offending rows in the message.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Parameter values outside the model's domain (e.g. sigma_eta <= 0).
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// A solver or optimizer failed to reach its stopping criterion.
struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace dclogit
