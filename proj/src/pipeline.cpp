#include "plpf/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "plpf/parallel.hpp"
#include "plpf/random.hpp"

namespace plpf::pipeline {

namespace {

void check_spec(TrainingSpec const& spec) {
    if (spec.p_samples < 2) {
        throw Error(ErrorKind::InvalidArgument, "p_samples must be >= 2, got " + std::to_string(spec.p_samples));
    }
    if (spec.mode == SamplingMode::uniform_random &&
        !(spec.interval_low >= 1.0 && spec.interval_low < spec.interval_high)) {
        throw Error(ErrorKind::InvalidArgument, "sampling interval must satisfy 1 <= low < high");
    }
    if (spec.mode == SamplingMode::fixed_granularity && !(spec.grid_low < spec.grid_high)) {
        throw Error(ErrorKind::InvalidArgument, "grid must satisfy low < high");
    }
}

void check_fingerprint(std::string const& expected, Network const& net) {
    if (expected != net.fingerprint()) {
        throw Error(ErrorKind::FingerprintMismatch,
                    "model was built for feeder " + expected + ", got " + net.fingerprint());
    }
}

Scenario scaled_per_bus(Scenario const& base, std::vector<double> const& u) {
    Scenario s = base;
    for (int i = 0; i < base.size(); ++i) {
        s.p[i] *= u[static_cast<std::size_t>(i)];
        s.q[i] *= u[static_cast<std::size_t>(i)];
    }
    return s;
}

struct Sample {
    Scenario scenario;
    lin::AlphaVector alpha;
};

Sample solve_sample(Network const& net, Scenario scen, TrainingSpec const& spec) {
    acpf::AcSolution sol = acpf::solve(net, scen, spec.ac);
    Vector ell = spec.approx_ell ? lin::approx_ell(net, sol.V) : sol.ell;
    lin::AlphaVector a = lin::exact_alpha(net, scen, ell, spec.eps_denom);
    return Sample{std::move(scen), std::move(a)};
}

Matrix branch_inputs(Network const& net, Scenario const& s) {
    Matrix X(net.n(), 2);
    X.col(0) = s.p;
    X.col(1) = s.q;
    return X;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json spec_json(TrainingSpec const& spec) {
    return {{"mode", std::string(to_string(spec.mode))},
            {"p_samples", spec.p_samples},
            {"interval", {spec.interval_low, spec.interval_high}},
            {"grid", {spec.grid_low, spec.grid_high}},
            {"seed", spec.seed},
            {"approx_ell", spec.approx_ell},
            {"eps_denom", spec.eps_denom},
            {"ac_tol", spec.ac.tol}};
}

}  // namespace

std::string_view to_string(SamplingMode m) {
    return m == SamplingMode::uniform_random ? "uniform_random" : "fixed_granularity";
}

std::string_view to_string(Layout l) { return l == Layout::stacked ? "stacked" : "per_branch"; }

SamplingMode parse_mode(std::string_view s) {
    if (s == "uniform" || s == "uniform_random") return SamplingMode::uniform_random;
    if (s == "grid" || s == "fixed_granularity") return SamplingMode::fixed_granularity;
    throw Error(ErrorKind::InvalidArgument, "unknown sampling mode '" + std::string(s) + "'");
}

Layout parse_layout(std::string_view s) {
    if (s == "stacked") return Layout::stacked;
    if (s == "per_branch" || s == "per-branch") return Layout::per_branch;
    throw Error(ErrorKind::InvalidArgument, "unknown layout '" + std::string(s) + "'");
}

std::vector<double> grid_multipliers(TrainingSpec const& spec) {
    check_spec(spec);
    std::vector<double> k(static_cast<std::size_t>(spec.p_samples));
    double const step = (spec.grid_high - spec.grid_low) / (spec.p_samples - 1);
    for (int s = 0; s < spec.p_samples; ++s) {
        k[static_cast<std::size_t>(s)] = s == spec.p_samples - 1 ? spec.grid_high : spec.grid_low + step * s;
    }
    return k;
}

TrainingSet gen_training_set(Network const& net, Scenario const& base, TrainingSpec const& spec) {
    check_spec(spec);
    if (base.size() != net.n()) {
        throw Error(ErrorKind::LengthMismatch, "base scenario does not match the network");
    }
    int const n = net.n();
    auto const count = static_cast<std::size_t>(spec.p_samples);
    std::vector<Sample> samples(count);

    if (spec.mode == SamplingMode::fixed_granularity) {
        std::vector<double> k = grid_multipliers(spec);
        parallel_for(count, [&](std::size_t s) { samples[s] = solve_sample(net, base.scaled(k[s]), spec); });
    } else {
        parallel_for(count, [&](std::size_t s) {
            std::mt19937_64 rng = stream(spec.seed, s);
            for (int attempt = 0;; ++attempt) {
                std::vector<double> u(static_cast<std::size_t>(n));
                for (double& ui : u) {
                    double mag = uniform_draw(rng, spec.interval_low, spec.interval_high);
                    ui = (rng() >> 63) != 0 ? -mag : mag;
                }
                try {
                    samples[s] = solve_sample(net, scaled_per_bus(base, u), spec);
                    return;
                } catch (NonConvergence const&) {
                    if (attempt >= spec.max_redraws) throw;
                }
            }
        });
    }

    TrainingSet ts;
    ts.n_branches = n;
    ts.p_samples = spec.p_samples;
    ts.fingerprint = net.fingerprint();
    ts.spec = spec;
    ts.data.X.resize(static_cast<Eigen::Index>(count) * n, 2);
    ts.data.y.resize(static_cast<Eigen::Index>(count) * n);
    ts.guarded.resize(count * static_cast<std::size_t>(n));
    for (std::size_t s = 0; s < count; ++s) {
        Eigen::Index const row0 = static_cast<Eigen::Index>(s) * n;
        ts.data.X.block(row0, 0, n, 2) = branch_inputs(net, samples[s].scenario);
        ts.data.y.segment(row0, n) = samples[s].alpha.alpha;
        for (int l = 0; l < n; ++l) {
            ts.guarded[static_cast<std::size_t>(row0 + l)] = samples[s].alpha.guarded[static_cast<std::size_t>(l)];
        }
        ts.scenarios.push_back(std::move(samples[s].scenario));
    }
    return ts;
}

std::string dataset_csv(TrainingSet const& ts) {
    std::ostringstream os;
    os << "sample,branch,p,q,alpha,guarded\n";
    for (int s = 0; s < ts.p_samples; ++s) {
        for (int l = 0; l < ts.n_branches; ++l) {
            Eigen::Index const row = static_cast<Eigen::Index>(s) * ts.n_branches + l;
            os << s << ',' << l + 1 << ',' << fmt(ts.data.X(row, 0)) << ',' << fmt(ts.data.X(row, 1)) << ','
               << fmt(ts.data.y[row]) << ',' << (ts.guarded[static_cast<std::size_t>(row)] ? 1 : 0) << '\n';
        }
    }
    return os.str();
}

ParameterizedModel parameterize(Network const& net, TrainingSet const& ts, FitSettings const& fit) {
    check_fingerprint(ts.fingerprint, net);
    ParameterizedModel m;
    m.layout_ = fit.layout;
    m.fingerprint_ = ts.fingerprint;
    m.n_ = ts.n_branches;
    gp::FitOptions opt;
    opt.restarts = fit.restarts;
    opt.seed = fit.seed;
    opt.noise_var = fit.noise_var;

    if (fit.layout == Layout::stacked) {
        m.predictors_.push_back(BranchPredictor{gp::fit(ts.data, opt), 0.0});
    } else {
        int const n = ts.n_branches;
        m.predictors_.resize(static_cast<std::size_t>(n));
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t l) {
            gp::Dataset d{Matrix(ts.p_samples, 2), Vector(ts.p_samples)};
            for (int s = 0; s < ts.p_samples; ++s) {
                Eigen::Index const row = static_cast<Eigen::Index>(s) * n + static_cast<Eigen::Index>(l);
                d.X.row(s) = ts.data.X.row(row);
                d.y[s] = ts.data.y[row];
            }
            if (d.y.maxCoeff() == d.y.minCoeff()) {
                m.predictors_[l] = BranchPredictor{std::nullopt, d.y[0]};
                return;
            }
            gp::FitOptions local = opt;
            local.seed = opt.seed + 0x9E3779B97F4A7C15ULL * (l + 1);
            m.predictors_[l] = BranchPredictor{gp::fit(d, local), 0.0};
        });
    }
    m.training_ = spec_json(ts.spec);
    m.training_["layout"] = std::string(to_string(fit.layout));
    m.training_["restarts"] = fit.restarts;
    m.training_["fit_seed"] = fit.seed;
    return m;
}

AlphaEstimate estimate_alpha(ParameterizedModel const& m, Network const& net, Scenario const& s) {
    check_fingerprint(m.fingerprint(), net);
    if (s.size() != net.n()) {
        throw Error(ErrorKind::LengthMismatch, "scenario does not match the network");
    }
    int const n = net.n();
    Matrix X = branch_inputs(net, s);
    AlphaEstimate out{Vector(n), Vector(n)};
    if (m.layout() == Layout::stacked) {
        gp::Posterior post = gp::posterior(*m.predictors().front().gp, X);
        out.alpha = post.mean;
        out.var = post.var;
        return out;
    }
    for (int l = 0; l < n; ++l) {
        BranchPredictor const& bp = m.predictors()[static_cast<std::size_t>(l)];
        if (!bp.gp) {
            out.alpha[l] = bp.constant;
            out.var[l] = 0.0;
            continue;
        }
        gp::Posterior post = gp::posterior(*bp.gp, X.row(l));
        out.alpha[l] = post.mean[0];
        out.var[l] = post.var[0];
    }
    return out;
}

Prediction predict(ParameterizedModel const& m, Network const& net, Scenario const& s) {
    AlphaEstimate a = estimate_alpha(m, net, s);
    lin::Voltages volt = lin::plpf_apply(net, a.alpha, s);
    Vector w = lin::branch_drop(net, s);
    Vector spread = apply_m_inv(net, a.var.cwiseSqrt().cwiseProduct(w));
    Vector ci_v = 1.96 * spread.cwiseAbs();
    Vector ci_V = ci_v.cwiseQuotient(2.0 * volt.V);
    return Prediction{std::move(volt.v), std::move(volt.V), std::move(ci_v), std::move(ci_V), std::move(a)};
}

lin::PlpfMatrices assemble(ParameterizedModel const& m, Network const& net, Scenario const& s) {
    return lin::plpf_assemble(net, lin::AlphaVector::from(estimate_alpha(m, net, s).alpha));
}

std::string save_model(ParameterizedModel const& m) {
    nlohmann::json j;
    j["format"] = "plpf-model";
    j["version"] = kModelVersion;
    j["fingerprint"] = m.fingerprint();
    j["n_branches"] = m.n_branches();
    j["layout"] = std::string(to_string(m.layout()));
    j["training"] = m.training_info();
    nlohmann::json preds = nlohmann::json::array();
    for (BranchPredictor const& bp : m.predictors()) {
        if (bp.gp) {
            preds.push_back({{"gp", bp.gp->to_json()}});
        } else {
            preds.push_back({{"constant", bp.constant}});
        }
    }
    j["predictors"] = std::move(preds);
    return j.dump(1) + "\n";
}

ParameterizedModel load_model(std::string_view bytes, Network const& net) {
    nlohmann::json j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw Error(ErrorKind::VersionMismatch, "not a readable model file");
    }
    if (j.value("format", "") != "plpf-model" || !j.contains("version") || !j["version"].is_number_integer() ||
        j["version"].get<int>() != kModelVersion) {
        throw Error(ErrorKind::VersionMismatch, "expected plpf-model version " + std::to_string(kModelVersion));
    }
    ParameterizedModel m;
    try {
        m.fingerprint_ = j.at("fingerprint").get<std::string>();
        check_fingerprint(m.fingerprint_, net);
        m.n_ = j.at("n_branches").get<int>();
        m.layout_ = parse_layout(j.at("layout").get<std::string>());
        m.training_ = j.at("training");
        for (auto const& p : j.at("predictors")) {
            if (p.contains("gp")) {
                m.predictors_.push_back(BranchPredictor{gp::Model::from_json(p.at("gp")), 0.0});
            } else {
                m.predictors_.push_back(BranchPredictor{std::nullopt, p.at("constant").get<double>()});
            }
        }
    } catch (nlohmann::json::exception const& e) {
        throw Error(ErrorKind::VersionMismatch, std::string("malformed model file: ") + e.what());
    }
    std::size_t const expected = m.layout_ == Layout::stacked ? 1u : static_cast<std::size_t>(m.n_);
    if (m.n_ != net.n() || m.predictors_.size() != expected) {
        throw Error(ErrorKind::VersionMismatch, "model file has the wrong number of predictors");
    }
    return m;
}

}  // namespace plpf::pipeline
