#pragma once

#include <stdexcept>
#include <string>

namespace lulc {

// Every failure surfaced to callers derives from Error. The category maps
// one-to-one onto CLI exit codes (see tools/cli).
enum class ErrorCategory { config, data, numerical, shape, io };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorCategory::shape, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

// Raised by the weights archive reader on malformed or inconsistent files.
class IntegrityError : public IoError {
public:
    explicit IntegrityError(const std::string& what) : IoError(what) {}
};

}  // namespace lulc
