#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plpf/acpf.hpp"
#include "plpf/pipeline.hpp"

namespace plpf::eval {

/// A voltage model under test: scenario -> |V| at buses 1..n.
struct Model {
    std::string name;
    std::function<Vector(Scenario const&)> voltages;
};

Model sdf_model(Network const& net);
Model plpf_model(pipeline::ParameterizedModel const& m, Network const& net);

struct Metrics {
    double eps_max = 0.0;
    double eps_avg = 0.0;
};

/// Max and mean absolute error over a p x n batch. Throws ShapeMismatch.
Metrics error_metrics(Matrix const& V_exact, Matrix const& V_hat);

struct Row {
    std::string feeder;
    std::string model;
    std::string protocol;   // base | sweep | mc
    std::optional<double> k;  // empty for whole-batch rows
    int p_star = 0;
    double eps_max = 0.0;
    double eps_avg = 0.0;
    std::uint64_t seed = 0;
};

struct Report {
    std::vector<Row> rows;
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<std::string> log;  // exclusions and skips

    Row const* find(std::string const& model, std::string const& protocol, std::optional<double> k = std::nullopt) const;
};

/// 30 equally spaced points over [-2, 2] without the dead zone |k| < 0.05.
std::vector<double> default_k_grid();

struct SweepOptions {
    acpf::AcOptions ac{};
    std::string protocol = "sweep";
    std::uint64_t seed = 0;  // recorded only
};

/// Scenario(k) = k * base. A k where the exact solve or any model fails is
/// dropped for every model and logged. Emits one row per (model, k) and one
/// whole-batch row per model.
Report continuation_sweep(std::string const& feeder, Network const& net, Scenario const& base,
                          std::vector<Model> const& models, std::vector<double> const& k_grid,
                          SweepOptions const& opt = {});

/// k_grid = {1}, labelled "base".
Report base_protocol(std::string const& feeder, Network const& net, Scenario const& base,
                     std::vector<Model> const& models, SweepOptions const& opt = {});

struct McOptions {
    acpf::AcOptions ac{};
    /// Replaces the random draw for sample i (used by tests).
    std::function<Scenario(int, Scenario const&)> draw;
};

/// Per-bus multipliers u ~ U[0, 1.5] applied to the complex base injection;
/// samples whose exact solve or model evaluation fails are skipped and logged.
Report monte_carlo(std::string const& feeder, Network const& net, Scenario const& base,
                   std::vector<Model> const& models, int n_samples, std::uint64_t seed, McOptions const& opt = {});

/// The multiplier draw used by monte_carlo for sample `index`.
Scenario mc_scenario(Scenario const& base, std::uint64_t seed, int index);

/// `feeder,model,protocol,k,p_star,eps_max,eps_avg,seed`. Throws
/// InvalidArgument on an empty report.
std::string emit_csv(Report const& r);

/// Metadata plus the CSV columns as objects.
nlohmann::json report_json(Report const& r);

/// Line plot of |V| against bus index, one polyline per model and a marker
/// per bus for the exact profile. Throws IoError.
void emit_svg_profiles(std::string const& path, std::string const& title, Vector const& exact,
                       std::vector<std::pair<std::string, Vector>> const& profiles);

}  // namespace plpf::eval
