#pragma once

#include <stdexcept>
#include <string>

namespace rsddp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TooManyPaths : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class MalformedFile : public Error {
public:
    using Error::Error;
};

class VersionMismatch : public MalformedFile {
public:
    using MalformedFile::MalformedFile;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Basis factorization failed even after a refactorization retry.
class NumericalBreakdown : public Error {
public:
    using Error::Error;
};

/// A stage subproblem came back infeasible, unbounded, or failed the
/// post-solve residual check. Carries the stage and outcome for triage.
class SubproblemFailure : public Error {
public:
    SubproblemFailure(const std::string& what, int stage, int outcome)
        : Error(what), stage_(stage), outcome_(outcome) {}

    int stage() const noexcept { return stage_; }
    int outcome() const noexcept { return outcome_; }

private:
    int stage_;
    int outcome_;
};

}  // namespace rsddp
