#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plpf/netmodel.hpp"

namespace plpf::casefile {

struct BusRow {
    int id = 0;
    int type = 1;      // 1 = PQ, 2 = PV, 3 = slack
    double pd = 0.0;   // MW
    double qd = 0.0;   // MVAr
    double base_kv = 0.0;
    double vm = 1.0;   // p.u.
    double va = 0.0;   // degrees
};

struct BranchRow {
    int from = 0;
    int to = 0;
    double r = 0.0;  // p.u.
    double x = 0.0;  // p.u.
    int status = 1;
};

/// The subset of a MATPOWER case this project consumes.
struct RawCase {
    double base_mva = 100.0;
    std::vector<BusRow> buses;
    std::vector<BranchRow> branches;
    /// Voltage setpoint of an in-service generator at the slack bus, if any.
    std::optional<double> slack_vg;
    /// Sections and statements that were skipped while parsing.
    std::vector<std::string> warnings;
};

struct LoadedCase {
    Network network;
    Scenario base;
};

/// Parses `mpc.baseMVA`, `mpc.bus`, `mpc.branch` and the slack setpoint from
/// `mpc.gen`. Throws Error(SyntaxError | MissingSection | NonNumericField).
RawCase parse_matpower(std::string_view text);

/// Writes a RawCase back as MATPOWER text that parse_matpower reads losslessly.
std::string to_matpower(RawCase const& raw, std::string_view name = "case");

/// Converts loads to per unit (injection-positive) and builds the radial
/// network from the in-service branches.
LoadedCase to_network(RawCase const& raw);

std::vector<std::string> builtin_names();

/// MATPOWER text of an embedded feeder. Throws Error(UnknownCase).
std::string_view builtin_text(std::string_view name);

LoadedCase builtin(std::string_view name);

/// Embedded feeder name or path to a `.m` file. Throws Error(IoError) when the
/// path cannot be read.
LoadedCase load_case(std::string_view source);

}  // namespace plpf::casefile
