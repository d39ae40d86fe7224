#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "plpf/errors.hpp"

using namespace plpf::cli;

namespace {

int exit_code(plpf::ErrorKind kind) {
    using K = plpf::ErrorKind;
    switch (kind) {
        case K::NonConvergence:
            return nonconvergence;
        case K::DegenerateTargets:
        case K::FactorizationFailure:
            return gp_failure;
        case K::SyntaxError:
        case K::MissingSection:
        case K::NonNumericField:
        case K::InvalidCase:
        case K::UnknownCase:
        case K::CycleDetected:
        case K::DisconnectedBus:
        case K::ZeroImpedanceBranch:
        case K::IoError:
        case K::VersionMismatch:
        case K::FingerprintMismatch:
            return parse;
        default:
            return usage;
    }
}

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--case", c.case_source, "Embedded feeder name (case33, case69, ...) or path to a MATPOWER .m file")
        ->required();
    cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    cmd->add_option("--tol", c.tol, "AC power flow mismatch tolerance (p.u.)")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--max-iter", c.max_iter, "AC power flow iteration cap")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--out", c.out_dir, "Output directory")->capture_default_str();
    cmd->add_flag("--force", c.force, "Overwrite existing output files");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parameterized linear power flow for radial distribution feeders"};
    app.require_subcommand(1);

    SolveArgs solve;
    auto* s = app.add_subcommand("solve", "Exact and linearized voltage profiles for one scenario");
    add_common(s, solve.common);
    s->add_option("--k", solve.k, "Scale all injections by k")->capture_default_str();
    s->add_option("--model", solve.model, "Trained model file; adds PLPF columns");
    s->add_flag("--csv", solve.write_csv, "Also write <case>_solve.csv into --out");

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Generate training data and fit the sensitivity model");
    add_common(t, train.common);
    t->add_option("--samples", train.samples, "Training scenarios p (>= 2)")->capture_default_str();
    t->add_option("--mode", train.mode, "Sampling: grid (equally spaced scalings) or uniform (random multipliers)")
        ->capture_default_str();
    t->add_option("--layout", train.layout, "per_branch (one GP per branch) or stacked (one GP on all rows)")
        ->capture_default_str();
    t->add_option("--restarts", train.restarts, "Optimizer starts per GP")->capture_default_str();

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Compare PLPF and sDistFlow against the exact solution");
    add_common(e, ev.common);
    e->add_option("--model", ev.model, "Trained model file");
    e->add_option("--protocol", ev.protocol, "base, sweep or mc")->capture_default_str();
    e->add_option("--mc-samples", ev.mc_samples, "Monte Carlo scenarios")->capture_default_str();
    e->add_option("--svg", ev.svg, "Write base-load voltage profiles to this SVG file");

    try {
        app.parse(argc, argv);
    } catch (CLI::CallForHelp const& err) {
        // top-level help lists the flags of every subcommand
        if (app.get_subcommands().empty()) {
            std::cout << app.help("", CLI::AppFormatMode::All);
            return ok;
        }
        return app.exit(err);
    } catch (CLI::ParseError const& err) {
        int rc = app.exit(err);
        return rc == 0 ? ok : usage;
    }

    try {
        if (*s) {
            std::cerr << to_json(solve).dump() << "\n";
            return cmd_solve(solve);
        }
        if (*t) {
            std::cerr << to_json(train).dump() << "\n";
            return cmd_train(train);
        }
        std::cerr << to_json(ev).dump() << "\n";
        return cmd_eval(ev);
    } catch (UsageError const& err) {
        std::cerr << "error: " << err.what() << "\n";
        return usage;
    } catch (plpf::Error const& err) {
        std::cerr << "error: " << err.what() << "\n";
        return exit_code(err.kind());
    }
}
