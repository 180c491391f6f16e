#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vardyn {

/// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed input file; carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Well-formed input that violates a data invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parameters outside the regime where a closed form is meaningful.
class RegimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Linear algebra or quadrature breakdown.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative solver stopped without meeting its tolerance; keeps the best point found.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> best)
        : std::runtime_error(what), best_(std::move(best)) {}
    [[nodiscard]] const std::vector<double>& best_iterate() const noexcept { return best_; }

private:
    std::vector<double> best_;
};

}  // namespace vardyn
