#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bart {

/// Argument outside the domain of an operation (bad state index, empty input, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A record or session violates a data-model invariant. The message names
/// the offending field and the rule.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string field, const std::string& rule, std::size_t line = 0)
        : std::runtime_error(format(field, rule, line)), field_(std::move(field)), rule_(rule), line_(line) {}

    const std::string& field() const noexcept { return field_; }
    const std::string& rule() const noexcept { return rule_; }
    ValidationError at_line(std::size_t line) const { return ValidationError(field_, rule_, line); }
    /// 1-based input line, 0 when not read from a file.
    std::size_t line() const noexcept { return line_; }

private:
    static std::string format(const std::string& field, const std::string& rule, std::size_t line) {
        std::string msg;
        if (line > 0) msg = "line " + std::to_string(line) + ": ";
        return msg + field + ": " + rule;
    }

    std::string field_;
    std::string rule_;
    std::size_t line_;
};

/// Malformed input text (not JSON, wrong types, missing keys).
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Optimizer produced a non-finite objective.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bart
