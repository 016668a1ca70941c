// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#ifndef RISPA_ERRORS_HPP
#define RISPA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rispa {

// Broad failure classes. The CLI maps them onto process exit codes.
enum class ErrorCategory { config, data, numeric, io, state };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

// Invalid argument or configuration value.
class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

// Data that is structurally valid but unusable (e.g. all-zero dataset).
class DegenerateDataError : public Error {
public:
    explicit DegenerateDataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

// Malformed binary file. The kind distinguishes bad headers from truncated payloads.
class FormatError : public Error {
public:
    enum class Kind { bad_magic, bad_version, bad_header, truncated, inconsistent };

    FormatError(Kind kind, const std::string& what) : Error(ErrorCategory::data, what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

// A trained artifact required by a command was not found.
class MissingArtifactError : public Error {
public:
    MissingArtifactError(const std::string& what, std::string producer)
        : Error(ErrorCategory::data, what), producer_(std::move(producer)) {}

    const std::string& producer() const noexcept { return producer_; }

private:
    std::string producer_;
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

// Training diverged; carries the epoch at which the loss became non-finite.
class TrainingError : public Error {
public:
    TrainingError(const std::string& what, int epoch) : Error(ErrorCategory::numeric, what), epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

class StateError : public Error {
public:
    explicit StateError(const std::string& what) : Error(ErrorCategory::state, what) {}
};

} // namespace rispa

#endif
