#pragma once

#include <stdexcept>
#include <string>

namespace ncqvi {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter or configuration value violates a documented range.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the domain of a function (non-finite input, z < K, u not in (0,1), ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Grid, boundary data or system assembly is inconsistent with the problem.
class AssemblyError : public Error {
public:
    using Error::Error;
};

/// The nonlinear or linear solve failed.
class SolverError : public Error {
public:
    using Error::Error;
};

/// The frictionless CRRA factor blows up inside the horizon.
class ExplosionError : public Error {
public:
    ExplosionError(const std::string& what, double critical_time)
        : Error(what), critical_time_(critical_time) {}
    double critical_time() const { return critical_time_; }

private:
    double critical_time_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace ncqvi
