#pragma once

#include "plpf/netmodel.hpp"

namespace plpf::acpf {

struct AcOptions {
    double tol = 1e-10;  // max complex power mismatch, p.u.
    int max_iter = 100;
};

/// Exact branch-flow solution. Bus vectors cover buses 1..n; branch vectors
/// are indexed by receiving bus.
struct AcSolution {
    Vector v;      // |V|^2
    Vector V;      // |V|
    Vector delta;  // rad
    Vector P;      // sending-end flows
    Vector Q;
    Vector ell;    // |I|^2
    int iterations = 0;
    double residual = 0.0;
};

/// Backward/forward sweep. Throws NonConvergence when the mismatch does not
/// drop below `tol` within `max_iter` sweeps, and Error(ZeroImpedanceBranch)
/// for branches with r = x = 0.
AcSolution solve(Network const& net, Scenario const& s, AcOptions const& opt = {});

/// Max over non-root buses of |s_i - V_i conj(I_i)| with the currents implied
/// by the voltages in `sol`.
double residual(Network const& net, Scenario const& s, AcSolution const& sol);

}  // namespace plpf::acpf
