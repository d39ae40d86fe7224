#pragma once

#include <vector>

#include "plpf/netmodel.hpp"

namespace plpf::lin {

/// Per-branch voltage sensitivity. Entries whose denominator was below the
/// guard threshold are exactly 0 and flagged.
struct AlphaVector {
    Vector alpha;
    std::vector<bool> guarded;

    static AlphaVector zero(int n) { return AlphaVector{Vector::Zero(n), std::vector<bool>(static_cast<std::size_t>(n), false)}; }
    static AlphaVector from(Vector a) {
        auto n = static_cast<std::size_t>(a.size());
        return AlphaVector{std::move(a), std::vector<bool>(n, false)};
    }
    int size() const { return static_cast<int>(alpha.size()); }
};

struct PlpfMatrices {
    Matrix Rhat;
    Matrix Xhat;
    /// Set when some |alpha| >= 0.1, outside the regime the model is built for.
    bool large_alpha = false;
};

struct Voltages {
    Vector v;  // squared magnitudes
    Vector V;
};

enum class LambdaMode { exact, binomial };

/// sDistFlow squared voltages v0 + 2 M^-1 (D(r) M^-T p + D(x) M^-T q).
Vector sdistflow_solve(Network const& net, Scenario const& s);

/// Per-branch drop term w = D(r) M^-T p + D(x) M^-T q.
Vector branch_drop(Network const& net, Scenario const& s);

/// Exact alpha from a converged branch-flow solution's squared currents:
/// alpha . w = [2 (D(r) M^-T D(r) + D(x) M^-T D(x)) + D(r)^2 + D(x)^2] ell.
AlphaVector exact_alpha(Network const& net, Scenario const& s, Vector const& ell, double eps_denom = 1e-9);

/// Squared currents estimated from voltage magnitudes of buses 1..n.
Vector approx_ell(Network const& net, Vector const& V);

/// Per-branch voltage ratio |V_i|/|V_j| - 1 (sending over receiving) from bus
/// magnitudes of buses 1..n. This is the local sensitivity behind
/// lambda_ij = |V_j|/|V_i| = 1/(1 + alpha_ij); on a two-bus feeder it is the
/// negative of exact_alpha.
Vector voltage_ratio_alpha(Network const& net, Vector const& V);

Vector lambda_from_alpha(Vector const& alpha, LambdaMode mode);

/// R = M^-1 (2I - D(alpha)) D(r) M^-T and X likewise, one column per traversal.
PlpfMatrices plpf_assemble(Network const& net, AlphaVector const& alpha_hat);

/// v = v0 + R p + X q. Throws Error(NegativeSquaredVoltage).
Voltages plpf_solve(PlpfMatrices const& mats, Scenario const& s, double v0);

/// Same model without forming R and X: v0 + M^-1 ((2 - alpha) . w).
Voltages plpf_apply(Network const& net, Vector const& alpha_hat, Scenario const& s);

}  // namespace plpf::lin
