#include "plpf/errors.hpp"

#include <sstream>

namespace plpf {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::CycleDetected: return "CycleDetected";
        case ErrorKind::DisconnectedBus: return "DisconnectedBus";
        case ErrorKind::InvalidCase: return "InvalidCase";
        case ErrorKind::SyntaxError: return "SyntaxError";
        case ErrorKind::MissingSection: return "MissingSection";
        case ErrorKind::NonNumericField: return "NonNumericField";
        case ErrorKind::UnknownCase: return "UnknownCase";
        case ErrorKind::NonConvergence: return "NonConvergence";
        case ErrorKind::ZeroImpedanceBranch: return "ZeroImpedanceBranch";
        case ErrorKind::SingularLambda: return "SingularLambda";
        case ErrorKind::NegativeSquaredVoltage: return "NegativeSquaredVoltage";
        case ErrorKind::DimMismatch: return "DimMismatch";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::DegenerateTargets: return "DegenerateTargets";
        case ErrorKind::FactorizationFailure: return "FactorizationFailure";
        case ErrorKind::FingerprintMismatch: return "FingerprintMismatch";
        case ErrorKind::VersionMismatch: return "VersionMismatch";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::UnreachedBusPhase: return "UnreachedBusPhase";
        case ErrorKind::SingularM: return "SingularM";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, std::string const& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

namespace {
std::string describe_nonconvergence(int iterations, double residual) {
    std::ostringstream os;
    os << "no convergence after " << iterations << " iterations (residual " << residual << " p.u.)";
    return os.str();
}
}  // namespace

NonConvergence::NonConvergence(int iterations, double residual)
    : Error(ErrorKind::NonConvergence, describe_nonconvergence(iterations, residual)),
      iterations_(iterations),
      residual_(residual) {}

}  // namespace plpf
