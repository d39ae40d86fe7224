#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace plpf {

enum class ErrorKind {
    LengthMismatch,
    CycleDetected,
    DisconnectedBus,
    InvalidCase,
    SyntaxError,
    MissingSection,
    NonNumericField,
    UnknownCase,
    NonConvergence,
    ZeroImpedanceBranch,
    SingularLambda,
    NegativeSquaredVoltage,
    DimMismatch,
    InvalidArgument,
    DegenerateTargets,
    FactorizationFailure,
    FingerprintMismatch,
    VersionMismatch,
    ShapeMismatch,
    IoError,
    UnreachedBusPhase,
    SingularM,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base exception for every failure raised by the library. The kind is the
/// stable, machine-checkable part; the message carries context (bus, line...).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string const& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class NonConvergence : public Error {
public:
    NonConvergence(int iterations, double residual);

    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

}  // namespace plpf
