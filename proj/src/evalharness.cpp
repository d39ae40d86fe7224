#include "plpf/evalharness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "plpf/linmodels.hpp"
#include "plpf/parallel.hpp"
#include "plpf/random.hpp"

namespace plpf::eval {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string utc_timestamp() {
    std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Exact and model voltages for one scenario, or the reason it was dropped.
struct Evaluated {
    bool ok = false;
    std::string reason;
    Vector exact;
    std::vector<Vector> hats;
};

Evaluated evaluate(Network const& net, Scenario const& s, std::vector<Model> const& models, acpf::AcOptions const& ac) {
    Evaluated e;
    try {
        e.exact = acpf::solve(net, s, ac).V;
    } catch (NonConvergence const& err) {
        e.reason = std::string("exact solve: ") + err.what();
        return e;
    }
    for (Model const& m : models) {
        try {
            e.hats.push_back(m.voltages(s));
        } catch (Error const& err) {
            e.reason = m.name + ": " + err.what();
            e.hats.clear();
            return e;
        }
    }
    e.ok = true;
    return e;
}

nlohmann::json ac_json(acpf::AcOptions const& ac) { return {{"tol", ac.tol}, {"max_iter", ac.max_iter}}; }

}  // namespace

Model sdf_model(Network const& net) {
    return Model{"SDF", [&net](Scenario const& s) {
                     Vector v = lin::sdistflow_solve(net, s);
                     for (Eigen::Index i = 0; i < v.size(); ++i) {
                         if (!(v[i] > 0.0)) {
                             throw Error(ErrorKind::NegativeSquaredVoltage, "bus " + std::to_string(i + 1));
                         }
                     }
                     return Vector(v.cwiseSqrt());
                 }};
}

Model plpf_model(pipeline::ParameterizedModel const& m, Network const& net) {
    return Model{"PLPF", [&m, &net](Scenario const& s) { return pipeline::predict(m, net, s).V; }};
}

Metrics error_metrics(Matrix const& V_exact, Matrix const& V_hat) {
    if (V_exact.rows() != V_hat.rows() || V_exact.cols() != V_hat.cols() || V_exact.size() == 0) {
        throw Error(ErrorKind::ShapeMismatch, "exact batch is " + std::to_string(V_exact.rows()) + "x" +
                                                  std::to_string(V_exact.cols()) + ", estimate batch is " +
                                                  std::to_string(V_hat.rows()) + "x" + std::to_string(V_hat.cols()));
    }
    Matrix d = (V_exact - V_hat).cwiseAbs();
    return Metrics{d.maxCoeff(), d.sum() / static_cast<double>(d.size())};
}

Row const* Report::find(std::string const& model, std::string const& protocol, std::optional<double> k) const {
    for (Row const& r : rows) {
        if (r.model != model || r.protocol != protocol) continue;
        if (k.has_value() != r.k.has_value()) continue;
        if (k && std::abs(*k - *r.k) > 1e-12) continue;
        return &r;
    }
    return nullptr;
}

std::vector<double> default_k_grid() {
    std::vector<double> k;
    for (int i = 0; i < 30; ++i) {
        double v = i == 29 ? 2.0 : -2.0 + 4.0 * i / 29.0;
        if (std::abs(v) >= 0.05) k.push_back(v);
    }
    return k;
}

Report continuation_sweep(std::string const& feeder, Network const& net, Scenario const& base,
                          std::vector<Model> const& models, std::vector<double> const& k_grid,
                          SweepOptions const& opt) {
    std::vector<Evaluated> results(k_grid.size());
    parallel_for(k_grid.size(), [&](std::size_t i) { results[i] = evaluate(net, base.scaled(k_grid[i]), models, opt.ac); });

    Report rep;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < k_grid.size(); ++i) {
        if (results[i].ok) {
            kept.push_back(i);
        } else {
            rep.log.push_back("k = " + fmt(k_grid[i]) + " excluded for all models (" + results[i].reason + ")");
        }
    }
    int const n = net.n();
    for (std::size_t m = 0; m < models.size(); ++m) {
        Matrix exact(static_cast<Eigen::Index>(kept.size()), n);
        Matrix hat(static_cast<Eigen::Index>(kept.size()), n);
        for (std::size_t r = 0; r < kept.size(); ++r) {
            Evaluated const& e = results[kept[r]];
            exact.row(static_cast<Eigen::Index>(r)) = e.exact.transpose();
            hat.row(static_cast<Eigen::Index>(r)) = e.hats[m].transpose();
            Metrics one = error_metrics(e.exact.transpose(), e.hats[m].transpose());
            rep.rows.push_back(Row{feeder, models[m].name, opt.protocol, k_grid[kept[r]], 1, one.eps_max, one.eps_avg,
                                   opt.seed});
        }
        if (k_grid.size() > 1 && !kept.empty()) {
            Metrics all = error_metrics(exact, hat);
            rep.rows.push_back(Row{feeder, models[m].name, opt.protocol, std::nullopt,
                                   static_cast<int>(kept.size()), all.eps_max, all.eps_avg, opt.seed});
        }
    }
    rep.metadata = {{"feeder", feeder},
                    {"protocol", opt.protocol},
                    {"k_grid", k_grid},
                    {"excluded", rep.log},
                    {"ac", ac_json(opt.ac)},
                    {"seed", opt.seed},
                    {"timestamp", utc_timestamp()}};
    return rep;
}

Report base_protocol(std::string const& feeder, Network const& net, Scenario const& base,
                     std::vector<Model> const& models, SweepOptions const& opt) {
    SweepOptions o = opt;
    o.protocol = "base";
    return continuation_sweep(feeder, net, base, models, {1.0}, o);
}

Scenario mc_scenario(Scenario const& base, std::uint64_t seed, int index) {
    std::mt19937_64 rng = stream(seed, static_cast<std::uint64_t>(index));
    Scenario s = base;
    for (int i = 0; i < base.size(); ++i) {
        double u = uniform_draw(rng, 0.0, 1.5);
        s.p[i] *= u;
        s.q[i] *= u;
    }
    return s;
}

Report monte_carlo(std::string const& feeder, Network const& net, Scenario const& base,
                   std::vector<Model> const& models, int n_samples, std::uint64_t seed, McOptions const& opt) {
    if (n_samples < 1) {
        throw Error(ErrorKind::InvalidArgument, "n_samples must be >= 1");
    }
    auto const count = static_cast<std::size_t>(n_samples);
    std::vector<Evaluated> results(count);
    parallel_for(count, [&](std::size_t i) {
        int const idx = static_cast<int>(i);
        Scenario s = opt.draw ? opt.draw(idx, base) : mc_scenario(base, seed, idx);
        results[i] = evaluate(net, s, models, opt.ac);
    });

    Report rep;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < count; ++i) {
        if (results[i].ok) {
            kept.push_back(i);
        } else {
            rep.log.push_back("sample " + std::to_string(i) + " skipped (" + results[i].reason + ")");
        }
    }
    int const n = net.n();
    if (!kept.empty()) {
        for (std::size_t m = 0; m < models.size(); ++m) {
            Matrix exact(static_cast<Eigen::Index>(kept.size()), n);
            Matrix hat(static_cast<Eigen::Index>(kept.size()), n);
            for (std::size_t r = 0; r < kept.size(); ++r) {
                exact.row(static_cast<Eigen::Index>(r)) = results[kept[r]].exact.transpose();
                hat.row(static_cast<Eigen::Index>(r)) = results[kept[r]].hats[m].transpose();
            }
            Metrics all = error_metrics(exact, hat);
            rep.rows.push_back(
                Row{feeder, models[m].name, "mc", std::nullopt, static_cast<int>(kept.size()), all.eps_max, all.eps_avg, seed});
        }
    }
    rep.metadata = {{"feeder", feeder},
                    {"protocol", "mc"},
                    {"n_samples", n_samples},
                    {"interval", {0.0, 1.5}},
                    {"skipped", rep.log},
                    {"ac", ac_json(opt.ac)},
                    {"seed", seed},
                    {"timestamp", utc_timestamp()}};
    return rep;
}

std::string emit_csv(Report const& r) {
    if (r.rows.empty()) {
        throw Error(ErrorKind::InvalidArgument, "report has no rows");
    }
    std::ostringstream os;
    os << "feeder,model,protocol,k,p_star,eps_max,eps_avg,seed\n";
    for (Row const& row : r.rows) {
        os << row.feeder << ',' << row.model << ',' << row.protocol << ',' << (row.k ? fmt(*row.k) : "") << ','
           << row.p_star << ',' << fmt(row.eps_max) << ',' << fmt(row.eps_avg) << ',' << row.seed << '\n';
    }
    return os.str();
}

nlohmann::json report_json(Report const& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (Row const& row : r.rows) {
        rows.push_back({{"feeder", row.feeder},
                        {"model", row.model},
                        {"protocol", row.protocol},
                        {"k", row.k ? nlohmann::json(*row.k) : nlohmann::json(nullptr)},
                        {"p_star", row.p_star},
                        {"eps_max", row.eps_max},
                        {"eps_avg", row.eps_avg},
                        {"seed", row.seed}});
    }
    return {{"metadata", r.metadata}, {"rows", rows}};
}

void emit_svg_profiles(std::string const& path, std::string const& title, Vector const& exact,
                       std::vector<std::pair<std::string, Vector>> const& profiles) {
    static char const* const colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"};
    double const W = 720, H = 420, left = 60, right = 150, top = 40, bottom = 50;
    double lo = exact.minCoeff(), hi = exact.maxCoeff();
    for (auto const& [name, v] : profiles) {
        lo = std::min(lo, v.minCoeff());
        hi = std::max(hi, v.maxCoeff());
    }
    if (hi - lo < 1e-9) {
        lo -= 0.005;
        hi += 0.005;
    }
    double const pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    auto const n = exact.size();
    auto px = [&](Eigen::Index i) { return left + (W - left - right) * (n > 1 ? double(i) / double(n - 1) : 0.5); };
    auto py = [&](double v) { return top + (H - top - bottom) * (hi - v) / (hi - lo); };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\"" << H << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n"
       << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
       << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
       << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        double v = lo + (hi - lo) * t / 4.0;
        char label[32];
        std::snprintf(label, sizeof label, "%.4f", v);
        os << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4 << "\" font-family=\"sans-serif\" font-size=\"10\" "
           << "text-anchor=\"end\">" << label << "</text>\n";
    }
    os << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 12
       << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">bus</text>\n";

    int c = 0;
    for (auto const& [name, v] : profiles) {
        char const* color = colors[c % 5];
        os << "<polyline class=\"model\" data-model=\"" << name << "\" fill=\"none\" stroke=\"" << color
           << "\" stroke-width=\"1.5\" points=\"";
        for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << px(i) << ',' << py(v[i]);
        os << "\"/>\n";
        os << "<text x=\"" << W - right + 10 << "\" y=\"" << top + 16 * (c + 1) << "\" font-family=\"sans-serif\" "
           << "font-size=\"11\" fill=\"" << color << "\">" << name << "</text>\n";
        ++c;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        os << "<circle class=\"exact\" cx=\"" << px(i) << "\" cy=\"" << py(exact[i]) << "\" r=\"2.5\" fill=\"black\"/>\n";
    }
    os << "<text x=\"" << W - right + 10 << "\" y=\"" << top << "\" font-family=\"sans-serif\" font-size=\"11\">"
       << "● exact</text>\n</svg>\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
    }
    out << os.str();
    if (!out) {
        throw Error(ErrorKind::IoError, "failed writing '" + path + "'");
    }
}

}  // namespace plpf::eval
