#pragma once

#include <stdexcept>
#include <string>

namespace mcf {

// Bad arguments, bad config values, geometry that cannot be satisfied.
// The CLI maps these to exit code 2.
class InvalidInput : public std::runtime_error {
public:
    explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file content; carries the source location.
class ParseError : public InvalidInput {
public:
    ParseError(const std::string& file, long line, const std::string& msg)
        : InvalidInput(file + ":" + std::to_string(line) + ": " + msg),
          file_(file), line_(line) {}
    const std::string& file() const { return file_; }
    long line() const { return line_; }

private:
    std::string file_;
    long line_;
};

// Tiles cannot be placed, windows overlap, shapes disagree.
class LayoutError : public InvalidInput {
public:
    explicit LayoutError(const std::string& msg) : InvalidInput(msg) {}
};

// Runtime failures (I/O, divergence). The CLI maps these to exit code 1.
class RuntimeFailure : public std::runtime_error {
public:
    explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mcf
