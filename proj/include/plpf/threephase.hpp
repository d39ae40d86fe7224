#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "plpf/linmodels.hpp"
#include "plpf/netmodel.hpp"

namespace plpf::tp {

enum class Phase : int { a = 0, b = 1, c = 2 };

char to_char(Phase p);

/// Non-empty subset of {a, b, c}, iterated in a, b, c order.
class PhaseSet {
public:
    PhaseSet() = default;
    /// "abc", "ac", ... Throws Error(InvalidCase) on empty or unknown letters.
    static PhaseSet parse(std::string_view text);
    static PhaseSet all() { return PhaseSet(0b111); }

    bool contains(Phase p) const { return (bits_ >> static_cast<int>(p)) & 1u; }
    int size() const;
    bool empty() const { return bits_ == 0; }
    bool subset_of(PhaseSet other) const { return (bits_ & ~other.bits_) == 0; }
    /// Position of `p` within the set; -1 if absent.
    int index_of(Phase p) const;
    std::vector<Phase> phases() const;
    std::string to_string() const;

    friend bool operator==(PhaseSet, PhaseSet) = default;

private:
    explicit PhaseSet(std::uint8_t bits) : bits_(bits) {}
    std::uint8_t bits_ = 0;
};

/// Series impedance of a line, one row/column per phase of the line.
struct LineImpedance {
    Eigen::MatrixXcd Z;
};

struct Line3 {
    int from_bus = 0;
    int to_bus = 0;
    PhaseSet phases;
    LineImpedance impedance;
};

struct Bus3 {
    int id = 0;
    PhaseSet phases;
};

/// (bus or line, phase) coordinate of a stacked vector entry. For line-phase
/// entries `index` is the receiving bus.
struct PhaseIndex {
    int index = 0;
    Phase phase = Phase::a;
};

/// Radial feeder with per-bus and per-line phase sets. Internal bus numbering
/// follows Network: root 0, others 1..n in label order; line l feeds bus l+1.
class ThreePhaseNetwork {
public:
    /// `root_v0` holds the squared root voltage of each root phase (a, b, c
    /// order). Throws Error(InvalidCase | CycleDetected | DisconnectedBus |
    /// LengthMismatch) on inconsistent input.
    static ThreePhaseNetwork build(std::vector<Bus3> const& buses, int root_id, std::vector<double> const& root_v0,
                                   std::vector<Line3> const& lines);

    /// Schema:
    /// {"root": id, "v0": [..], "buses": [{"id", "phases"}],
    ///  "lines": [{"from", "to", "phases", "r": [[..]], "x": [[..]]}]}
    static ThreePhaseNetwork from_json(nlohmann::json const& j);
    static ThreePhaseNetwork load(std::string const& path);

    int n() const { return topology_.n(); }
    Network const& topology() const { return topology_; }
    PhaseSet bus_phases(int bus) const { return bus_phases_[static_cast<std::size_t>(bus)]; }
    /// Line feeding internal bus `bus` (1..n).
    Line3 const& line_into(int bus) const { return lines_[static_cast<std::size_t>(bus - 1)]; }
    double root_v0(Phase p) const { return root_v0_[static_cast<std::size_t>(p)]; }

    /// Bus-phase entries of buses 1..n; the ordering of p, q and v vectors.
    std::vector<PhaseIndex> const& bus_phase_index() const { return bus_index_; }
    /// Line-phase entries; the ordering of alpha and the incidence rows.
    std::vector<PhaseIndex> const& line_phase_index() const { return line_index_; }

    /// Single-phase feeder made of the buses carrying phase `p`, with the
    /// self impedances of that phase. Empty when only the root carries it.
    std::optional<Network> induced(Phase p) const;

private:
    ThreePhaseNetwork() = default;

    Network topology_ = Network::from_parents({-1, 0}, Vector::Zero(1), Vector::Zero(1));
    std::vector<PhaseSet> bus_phases_;
    std::vector<Line3> lines_;
    std::array<double, 3> root_v0_{};
    std::vector<PhaseIndex> bus_index_;
    std::vector<PhaseIndex> line_index_;
};

struct Incidence3 {
    Matrix M0;  // line-phases x root phases (a, b, c order, only those present)
    Matrix M;   // line-phases x bus-phases
};

/// Block edge-to-node incidence. Throws Error(UnreachedBusPhase) when a
/// non-root bus-phase has no line-phase feeding it.
Incidence3 build_3p_incidence(ThreePhaseNetwork const& net);

struct Plpf3System {
    Incidence3 incidence;
    Matrix Rhat;  // (2I - D(alpha)) D(r) M^-T, line-phases x bus-phases
    Matrix Xhat;
    Vector alpha;
    bool large_alpha = false;
    /// Per-phase single-phase matrices on the induced feeders.
    std::array<std::optional<lin::PlpfMatrices>, 3> per_phase;
};

/// Mutual impedances are dropped; each phase uses its self impedances.
/// Throws Error(LengthMismatch | InvalidArgument | SingularM).
Plpf3System plpf3_assemble(ThreePhaseNetwork const& net, Vector const& alpha_hat);

/// Squared voltages per bus-phase. `p` and `q` follow bus_phase_index().
/// Throws Error(LengthMismatch | NegativeSquaredVoltage).
lin::Voltages plpf3_solve(ThreePhaseNetwork const& net, Plpf3System const& sys, Vector const& p, Vector const& q);

}  // namespace plpf::tp
