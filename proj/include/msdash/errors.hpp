#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace msdash {

/// Caller passed an argument outside an operation's domain (bad level index, etc).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A configuration (manifest, env config, path set) cannot produce a valid simulation.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. The message always carries "file:line".
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

/// An action outside the current validity mask reached the engine.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace msdash
