#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plpf/acpf.hpp"
#include "plpf/gpr.hpp"
#include "plpf/linmodels.hpp"

namespace plpf::pipeline {

enum class SamplingMode { uniform_random, fixed_granularity };
enum class Layout { stacked, per_branch };

std::string_view to_string(SamplingMode m);
std::string_view to_string(Layout l);
SamplingMode parse_mode(std::string_view s);  // "uniform" | "grid" (also the long names)
Layout parse_layout(std::string_view s);      // "stacked" | "per_branch"

struct TrainingSpec {
    int p_samples = 20;
    // uniform_random: per-bus multiplier u ~ U[low, high] with a random sign
    double interval_low = 1.0;
    double interval_high = 2.0;
    // fixed_granularity: p_samples equally spaced uniform scalings k over [grid_low, grid_high]
    SamplingMode mode = SamplingMode::fixed_granularity;
    double grid_low = -2.0;
    double grid_high = 3.0;
    std::uint64_t seed = 0;
    bool approx_ell = false;
    double eps_denom = 1e-9;
    acpf::AcOptions ac{};
    int max_redraws = 3;
};

/// Training data in sample-major order: row s*n + l pairs branch l with the
/// (p, q) of its receiving bus in sample s.
struct TrainingSet {
    gp::Dataset data;
    std::vector<bool> guarded;
    int n_branches = 0;
    int p_samples = 0;
    std::string fingerprint;
    TrainingSpec spec;
    std::vector<Scenario> scenarios;
};

/// Per-bus multipliers used for sample `s` (fixed_granularity ignores the rng).
std::vector<double> grid_multipliers(TrainingSpec const& spec);

/// Solves the exact power flow for each sample and records exact alpha.
/// Throws Error(InvalidArgument) for bad specs, NonConvergence when a sample
/// cannot be solved (after `max_redraws` fresh draws in uniform mode).
TrainingSet gen_training_set(Network const& net, Scenario const& base, TrainingSpec const& spec);

/// `sample,branch,p,q,alpha,guarded` with branch = receiving bus index.
std::string dataset_csv(TrainingSet const& ts);

struct FitSettings {
    Layout layout = Layout::per_branch;
    int restarts = 5;
    std::uint64_t seed = 0;
    double noise_var = 0.0;
};

/// One GP (or a constant, for branches whose targets never vary).
struct BranchPredictor {
    std::optional<gp::Model> gp;
    double constant = 0.0;
};

struct AlphaEstimate {
    Vector alpha;
    Vector var;
};

struct Prediction {
    Vector v;
    Vector V;
    Vector ci_v;  // 95% half-width on v: 1.96 |M^-1 D(sigma_alpha) w|
    Vector ci_V;  // the same band mapped to |V| to first order, ci_v / (2 V)
    AlphaEstimate alpha;
};

class ParameterizedModel {
public:
    Layout layout() const { return layout_; }
    std::string const& fingerprint() const { return fingerprint_; }
    int n_branches() const { return n_; }
    std::vector<BranchPredictor> const& predictors() const { return predictors_; }
    nlohmann::json const& training_info() const { return training_; }

private:
    friend ParameterizedModel parameterize(Network const&, TrainingSet const&, FitSettings const&);
    friend ParameterizedModel load_model(std::string_view, Network const&);

    Layout layout_ = Layout::per_branch;
    std::string fingerprint_;
    int n_ = 0;
    std::vector<BranchPredictor> predictors_;
    nlohmann::json training_;
};

/// Fits the GP(s) with noise-free observations. Throws FingerprintMismatch if
/// the training set belongs to another feeder, and propagates gp errors.
ParameterizedModel parameterize(Network const& net, TrainingSet const& ts, FitSettings const& fit = {});

/// Posterior mean and variance of alpha at the scenario's per-bus (p, q).
AlphaEstimate estimate_alpha(ParameterizedModel const& m, Network const& net, Scenario const& s);

/// PLPF voltages with first-order 95% half-widths. Throws NegativeSquaredVoltage.
Prediction predict(ParameterizedModel const& m, Network const& net, Scenario const& s);

/// Explicit R and X for one operating point.
lin::PlpfMatrices assemble(ParameterizedModel const& m, Network const& net, Scenario const& s);

inline constexpr int kModelVersion = 1;

std::string save_model(ParameterizedModel const& m);

/// Throws VersionMismatch (unreadable or other version) and FingerprintMismatch.
ParameterizedModel load_model(std::string_view bytes, Network const& net);

}  // namespace plpf::pipeline
