#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

namespace plpf::cli {

enum Exit : int { ok = 0, usage = 1, parse = 2, nonconvergence = 3, gp_failure = 4 };

struct Common {
    std::string case_source;
    std::uint64_t seed = 0;
    double tol = 1e-10;
    int max_iter = 100;
    std::string out_dir = ".";
    bool force = false;
};

struct SolveArgs {
    Common common;
    double k = 1.0;
    std::string model;  // optional model file
    bool write_csv = false;
};

struct TrainArgs {
    Common common;
    int samples = 20;
    std::string mode = "grid";
    std::string layout = "per_branch";
    int restarts = 5;
};

struct EvalArgs {
    Common common;
    std::string model;
    std::string protocol = "base";
    int mc_samples = 1000;
    std::string svg;
};

/// Thrown for argument problems found after flag parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

nlohmann::json to_json(SolveArgs const& a);
nlohmann::json to_json(TrainArgs const& a);
nlohmann::json to_json(EvalArgs const& a);

int cmd_solve(SolveArgs const& a);
int cmd_train(TrainArgs const& a);
int cmd_eval(EvalArgs const& a);

}  // namespace plpf::cli
