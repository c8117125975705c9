#pragma once

#include <stdexcept>
#include <string>

namespace brt {

// Base for every error raised by the toolkit. `is_validation()` separates bad
// input (exit code 1) from runtime failures (exit code 2) at the CLI boundary.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, bool validation = false)
        : std::runtime_error(what), validation_(validation) {}
    bool is_validation() const noexcept { return validation_; }

private:
    bool validation_;
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(what, true) {}
};

class InvalidDistribution : public Error {
public:
    explicit InvalidDistribution(const std::string& what) : Error(what, true) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(what, true) {}
};

class GaugeError : public Error {
public:
    explicit GaugeError(const std::string& what) : Error(what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what, true) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(what, true) {}
};

// Output could not be written (disk full, closed pipe, ...).
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, long iteration)
        : Error(what), iteration_(iteration) {}
    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

} // namespace brt
