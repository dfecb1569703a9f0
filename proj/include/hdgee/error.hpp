#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hdgee {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Cholesky factorization met a pivot at or below the positivity threshold.
class NotPositiveDefinite : public Error {
public:
    NotPositiveDefinite(std::size_t pivot_index, double pivot);
    std::size_t pivot_index() const noexcept { return pivot_index_; }
    double pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_index_;
    double pivot_;
};

/// Marginal variance underflowed or residuals collapsed; the fit cannot proceed.
class DegenerateFit : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

/// A Bahadur pmf cell went negative.
class BahadurInvalid : public Error {
public:
    BahadurInvalid(std::size_t outcome, double cell);
    std::size_t outcome() const noexcept { return outcome_; }
    double cell() const noexcept { return cell_; }

private:
    std::size_t outcome_;
    double cell_;
};

/// Input file violates the CSV schema.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A study exceeded its exclusion or generation-validity threshold.
class StudyAborted : public Error {
public:
    using Error::Error;
};

}  // namespace hdgee
