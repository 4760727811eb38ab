#pragma once

#include <stdexcept>
#include <string>

namespace wsub {

// Input violates a documented precondition (bad probability, bad grid, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A measure that fails its own invariants (negative mass, mass not summing to one).
class InvalidMeasure : public DomainError {
public:
    using DomainError::DomainError;
};

// Input is well formed but too large for an exact desk-scale solve.
class SizeError : public std::length_error {
public:
    using std::length_error::length_error;
};

// Zero variance, zero mass and similar inputs that admit no meaningful answer.
class DegenerateInput : public DomainError {
public:
    using DomainError::DomainError;
};

// Endpoints or initial data do not satisfy the requested constraints.
class Infeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A grid flow pushed mass onto the boundary cells.
class BoundaryMassError : public std::runtime_error {
public:
    BoundaryMassError(const std::string& what, double required_half_width)
        : std::runtime_error(what), required_half_width_(required_half_width) {}
    double required_half_width() const noexcept { return required_half_width_; }

private:
    double required_half_width_;
};

// Malformed input file; carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace wsub
