// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agentlab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Bad or missing configuration (config file, env var, preset).
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// A model backend failed. status is the HTTP status, or 0 for transport failures.
class BackendError : public Error {
public:
    BackendError(int status, std::string body_excerpt)
        : Error(make_message(status, body_excerpt)), status_(status),
          excerpt_(std::move(body_excerpt)) {}

    int status() const noexcept { return status_; }
    const std::string& body_excerpt() const noexcept { return excerpt_; }

private:
    static std::string make_message(int status, const std::string& excerpt) {
        if (status == 0) return "backend error: " + excerpt;
        return "backend error: HTTP " + std::to_string(status) + ": " + excerpt;
    }

    int status_;
    std::string excerpt_;
};

/// Malformed file content; line is 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace agentlab
