#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "plpf/errors.hpp"

namespace plpf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A line between two buses. Impedances are per unit.
struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
};

/// Net complex injections at the non-root buses, injection-positive (loads are
/// negative). Entry i-1 belongs to internal bus i.
struct Scenario {
    Vector p;
    Vector q;

    static Scenario zero(int n);

    int size() const { return static_cast<int>(p.size()); }
    Scenario scaled(double k) const;
};

/// Outcome of a radiality check. `bus` names the offending bus label (or -1).
struct RadialDiagnostic {
    bool ok = true;
    ErrorKind kind = ErrorKind::InvalidCase;
    std::string message;
    int bus = -1;

    explicit operator bool() const { return ok; }
};

/// Checks that the branch list forms a tree spanning every listed bus and
/// rooted at `root_label`. Labels are the caller's original bus ids.
RadialDiagnostic validate_radial(std::span<int const> bus_labels, int root_label,
                                 std::span<Branch const> branches);

/// Immutable radial feeder.
///
/// Buses are renumbered 0..n with the root at 0; non-root buses keep the
/// relative order of their original labels. Branch l is identified with its
/// receiving bus l+1, so r(), x() and every branch-indexed vector have length n.
class Network {
public:
    /// Throws Error(CycleDetected | DisconnectedBus | InvalidCase) for
    /// non-radial input. Branch orientation in the input does not matter.
    static Network build(std::span<int const> bus_labels, int root_label, std::span<Branch const> branches,
                         double root_voltage_sq = 1.0, double base_mva = 1.0);

    /// parent[i] for i = 1..n (parent[0] is ignored); labels default to 0..n.
    static Network from_parents(std::vector<int> const& parent, Vector const& r, Vector const& x,
                                double root_voltage_sq = 1.0, double base_mva = 1.0);

    int n() const { return static_cast<int>(parent_.size()) - 1; }
    double root_voltage_sq() const { return root_voltage_sq_; }
    double base_mva() const { return base_mva_; }

    int parent(int bus) const { return parent_[static_cast<std::size_t>(bus)]; }
    std::span<int const> children(int bus) const;
    /// Non-root buses in an order where every parent precedes its children.
    std::span<int const> order() const { return order_; }

    Vector const& r() const { return r_; }
    Vector const& x() const { return x_; }
    /// Branches oriented away from the root, sorted by receiving bus.
    std::vector<Branch> branches() const;

    int label(int bus) const { return labels_[static_cast<std::size_t>(bus)]; }
    std::vector<int> const& labels() const { return labels_; }

    /// Stable 64-bit FNV-1a digest over topology, impedances and v0 (hex).
    std::string fingerprint() const;

private:
    Network() = default;
    void finalize();

    std::vector<int> parent_;
    std::vector<int> child_offsets_;
    std::vector<int> child_list_;
    std::vector<int> order_;
    std::vector<int> labels_;
    Vector r_;
    Vector x_;
    double root_voltage_sq_ = 1.0;
    double base_mva_ = 1.0;
};

struct Incidence {
    Vector m0;  // root column of the full incidence matrix
    Matrix M;   // reduced n x n incidence matrix (rows = branches, cols = buses 1..n)
};

/// Dense [m0 M]: +1 where a branch leaves a bus, -1 where it enters.
Incidence build_incidence(Network const& net);

/// M^-T * nodal: entry l is minus the sum of `nodal` over the subtree below
/// branch l. `edge_visits`, when given, accumulates the traversal count.
Vector apply_m_inv_t(Network const& net, Vector const& nodal, std::size_t* edge_visits = nullptr);

/// M^-1 * branch: entry i is minus the sum of `branch` along the root-to-i path.
Vector apply_m_inv(Network const& net, Vector const& branch, std::size_t* edge_visits = nullptr);

/// M * nodal, with the root value taken as zero.
Vector apply_m(Network const& net, Vector const& nodal);

}  // namespace plpf
