#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "plpf/acpf.hpp"
#include "plpf/casefile.hpp"
#include "plpf/evalharness.hpp"
#include "plpf/linmodels.hpp"
#include "plpf/pipeline.hpp"

namespace plpf::cli {

namespace fs = std::filesystem;

namespace {

nlohmann::json common_json(Common const& c) {
    return {{"case", c.case_source}, {"seed", c.seed},   {"tol", c.tol},
            {"max_iter", c.max_iter}, {"out", c.out_dir}, {"force", c.force}};
}

std::string case_stem(std::string const& source) { return fs::path(source).stem().string(); }

// Refuses to clobber an existing output unless --force was given.
fs::path output_path(Common const& c, std::string const& name) {
    fs::path dir(c.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw UsageError("output directory '" + c.out_dir + "' is not writable");
    fs::path p = dir / name;
    if (fs::exists(p) && !c.force) throw UsageError("'" + p.string() + "' exists; pass --force to overwrite");
    return p;
}

void write_file(fs::path const& p, std::string const& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
    if (!out) throw Error(ErrorKind::IoError, "cannot write '" + p.string() + "'");
}

std::string read_file(std::string const& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read model file '" + path + "'; create one with `plpf train`");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

acpf::AcOptions ac_options(Common const& c) { return {c.tol, c.max_iter}; }

}  // namespace

nlohmann::json to_json(SolveArgs const& a) {
    auto j = common_json(a.common);
    j["command"] = "solve";
    j["k"] = a.k;
    j["model"] = a.model;
    j["csv"] = a.write_csv;
    return j;
}

nlohmann::json to_json(TrainArgs const& a) {
    auto j = common_json(a.common);
    j["command"] = "train";
    j["samples"] = a.samples;
    j["mode"] = a.mode;
    j["layout"] = a.layout;
    j["restarts"] = a.restarts;
    return j;
}

nlohmann::json to_json(EvalArgs const& a) {
    auto j = common_json(a.common);
    j["command"] = "eval";
    j["model"] = a.model;
    j["protocol"] = a.protocol;
    j["mc_samples"] = a.mc_samples;
    j["svg"] = a.svg;
    return j;
}

int cmd_solve(SolveArgs const& a) {
    auto c = casefile::load_case(a.common.case_source);
    Scenario s = c.base.scaled(a.k);
    auto exact = acpf::solve(c.network, s, ac_options(a.common));
    Vector sdf = lin::sdistflow_solve(c.network, s).cwiseSqrt();
    std::optional<pipeline::Prediction> plpf;
    if (!a.model.empty()) {
        plpf = pipeline::predict(pipeline::load_model(read_file(a.model), c.network), c.network, s);
    }

    std::ostringstream table;
    table << "bus,V_exact,V_sdf,err_sdf";
    if (plpf) table << ",V_plpf,err_plpf,ci_V";
    table << "\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.10g", v);
        return std::string(buf);
    };
    for (int i = 0; i < c.network.n(); ++i) {
        table << c.network.label(i + 1) << ',' << num(exact.V[i]) << ',' << num(sdf[i]) << ','
              << num(std::abs(sdf[i] - exact.V[i]));
        if (plpf) {
            table << ',' << num(plpf->V[i]) << ',' << num(std::abs(plpf->V[i] - exact.V[i])) << ',' << num(plpf->ci_V[i]);
        }
        table << "\n";
    }
    std::cout << table.str();
    std::cerr << "ac solve: " << exact.iterations << " iterations, residual " << exact.residual << "\n";
    if (a.write_csv) {
        write_file(output_path(a.common, case_stem(a.common.case_source) + "_solve.csv"), table.str());
    }
    return ok;
}

int cmd_train(TrainArgs const& a) {
    if (a.samples < 2) throw UsageError("--samples must be at least 2");
    if (a.restarts < 1) throw UsageError("--restarts must be at least 1");
    pipeline::TrainingSpec spec;
    pipeline::FitSettings fit;
    try {
        spec.mode = pipeline::parse_mode(a.mode);
        fit.layout = pipeline::parse_layout(a.layout);
    } catch (Error const& e) {
        throw UsageError(e.what());
    }
    spec.p_samples = a.samples;
    spec.seed = a.common.seed;
    spec.ac = ac_options(a.common);
    fit.restarts = a.restarts;
    fit.seed = a.common.seed;

    auto c = casefile::load_case(a.common.case_source);
    std::string stem = case_stem(a.common.case_source);
    fs::path model_path = output_path(a.common, stem + "_model.json");
    fs::path data_path = output_path(a.common, stem + "_dataset.csv");

    auto ts = pipeline::gen_training_set(c.network, c.base, spec);
    auto model = pipeline::parameterize(c.network, ts, fit);
    write_file(data_path, pipeline::dataset_csv(ts));
    write_file(model_path, pipeline::save_model(model));

    nlohmann::json summary = {{"model", model_path.string()},
                              {"dataset", data_path.string()},
                              {"rows", ts.data.y.size()},
                              {"training", model.training_info()}};
    nlohmann::json hps = nlohmann::json::array();
    for (auto const& bp : model.predictors()) {
        if (!bp.gp) {
            hps.push_back({{"constant", bp.constant}});
            continue;
        }
        auto const& hp = bp.gp->hyperparams();
        hps.push_back({{"signal_var", hp.signal_var},
                       {"length_scale", hp.length_scale},
                       {"log_likelihood", bp.gp->log_likelihood()},
                       {"jitter", bp.gp->jitter()}});
    }
    summary["hyperparams"] = hps;
    std::cout << summary.dump(2) << "\n";
    return ok;
}

int cmd_eval(EvalArgs const& a) {
    if (a.model.empty()) throw UsageError("eval needs --model <file>; create one with `plpf train`");
    if (a.protocol != "base" && a.protocol != "sweep" && a.protocol != "mc") {
        throw UsageError("--protocol must be base, sweep or mc");
    }
    if (a.mc_samples < 1) throw UsageError("--mc-samples must be at least 1");
    auto c = casefile::load_case(a.common.case_source);
    auto model = pipeline::load_model(read_file(a.model), c.network);
    std::string stem = case_stem(a.common.case_source);
    fs::path csv_path = output_path(a.common, stem + "_" + a.protocol + ".csv");
    fs::path json_path = output_path(a.common, stem + "_" + a.protocol + ".json");
    std::optional<fs::path> svg_path;
    if (!a.svg.empty()) {
        svg_path = fs::path(a.svg);
        if (fs::exists(*svg_path) && !a.common.force) {
            throw UsageError("'" + a.svg + "' exists; pass --force to overwrite");
        }
    }

    std::vector<eval::Model> models{eval::sdf_model(c.network), eval::plpf_model(model, c.network)};
    eval::Report report;
    if (a.protocol == "mc") {
        eval::McOptions opt;
        opt.ac = ac_options(a.common);
        report = eval::monte_carlo(stem, c.network, c.base, models, a.mc_samples, a.common.seed, opt);
    } else {
        eval::SweepOptions opt;
        opt.ac = ac_options(a.common);
        opt.seed = a.common.seed;
        report = a.protocol == "base" ? eval::base_protocol(stem, c.network, c.base, models, opt)
                                      : eval::continuation_sweep(stem, c.network, c.base, models, eval::default_k_grid(), opt);
    }
    std::string csv = eval::emit_csv(report);
    write_file(csv_path, csv);
    write_file(json_path, eval::report_json(report).dump(2) + "\n");
    for (auto const& line : report.log) std::cerr << line << "\n";

    if (svg_path) {
        auto exact = acpf::solve(c.network, c.base, ac_options(a.common));
        std::vector<std::pair<std::string, Vector>> profiles;
        for (auto const& m : models) profiles.emplace_back(m.name, m.voltages(c.base));
        eval::emit_svg_profiles(svg_path->string(), stem + " base load", exact.V, profiles);
    }
    std::cout << csv;
    return ok;
}

}  // namespace plpf::cli
