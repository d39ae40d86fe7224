#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "plpf/casefile.hpp"
#include "plpf/evalharness.hpp"

using namespace plpf;
using namespace plpf::eval;

namespace {

int count_of(std::string const& text, std::string const& needle) {
    int n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

template <typename F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (Error const& e) {
        return e.kind();
    }
    return ErrorKind::LengthMismatch;
}

}  // namespace

TEST_CASE("error metrics") {
    Matrix exact = Matrix::Ones(1, 32);
    CHECK(error_metrics(exact, exact).eps_max == 0.0);
    CHECK(error_metrics(exact, exact).eps_avg == 0.0);

    Matrix off = exact;
    off(0, 7) += 0.01;
    Metrics m = error_metrics(exact, off);
    CHECK(m.eps_max == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(m.eps_avg == doctest::Approx(0.01 / 32).epsilon(1e-12));

    Matrix a = Matrix::Random(4, 6);
    Matrix b = Matrix::Random(4, 6);
    Metrics base = error_metrics(a, b);
    Metrics scaled = error_metrics(3.0 * a, 3.0 * b);
    CHECK(base.eps_avg <= base.eps_max);
    CHECK(scaled.eps_max == doctest::Approx(3.0 * base.eps_max));
    CHECK(scaled.eps_avg == doctest::Approx(3.0 * base.eps_avg));

    CHECK(kind_of([] { error_metrics(Matrix::Ones(2, 3), Matrix::Ones(3, 2)); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("SDF base errors on the reference feeders") {
    auto c33 = casefile::builtin("case33");
    Report r = base_protocol("case33", c33.network, c33.base, {sdf_model(c33.network)});
    Row const* row = r.find("SDF", "base", 1.0);
    REQUIRE(row != nullptr);
    CHECK(row->eps_max == doctest::Approx(0.00284).epsilon(0.01));
    CHECK(row->eps_avg == doctest::Approx(0.00198).epsilon(0.01));
    CHECK(row->p_star == 1);
    // a single-point grid has no separate batch row
    CHECK(r.rows.size() == 1);
}

TEST_CASE("default continuation grid") {
    auto k = default_k_grid();
    CHECK(k.size() == 30);
    CHECK(k.front() == -2.0);
    CHECK(k.back() == 2.0);
    for (double v : k) CHECK(std::abs(v) >= 0.05);
}

TEST_CASE("continuation sweep") {
    auto c = casefile::builtin("case33");
    Report r = continuation_sweep("case33", c.network, c.base, {sdf_model(c.network)}, {-1.0, 0.0, 1.0, 2.0});
    Row const* zero = r.find("SDF", "sweep", 0.0);
    REQUIRE(zero != nullptr);
    CHECK(zero->eps_max == 0.0);
    CHECK(zero->eps_avg == 0.0);
    Row const* all = r.find("SDF", "sweep");
    REQUIRE(all != nullptr);
    CHECK(all->p_star == 4);
    for (Row const& row : r.rows) {
        CHECK(row.eps_avg <= row.eps_max);
        CHECK(row.eps_avg >= 0.0);
    }
    CHECK(r.metadata["k_grid"].size() == 4);
}

TEST_CASE("fair exclusion") {
    auto c = casefile::builtin("case33");
    Model sdf = sdf_model(c.network);
    Model flaky{"flaky", [&](Scenario const& s) -> Vector {
                    if (s.p[0] > 0.0) throw Error(ErrorKind::NegativeSquaredVoltage, "flaky");
                    return sdf.voltages(s);
                }};
    Report r = continuation_sweep("case33", c.network, c.base, {sdf, flaky}, {-1.0, 0.5, 1.0, 30.0});
    for (std::string name : {"SDF", "flaky"}) {
        CHECK(r.find(name, "sweep", -1.0) == nullptr);
        CHECK(r.find(name, "sweep", 30.0) == nullptr);
        CHECK(r.find(name, "sweep", 1.0) != nullptr);
        CHECK(r.find(name, "sweep")->p_star == 2);
    }
    CHECK(r.log.size() == 2);
    CHECK(r.find("SDF", "sweep")->eps_max == r.find("flaky", "sweep")->eps_max);
}

TEST_CASE("Monte Carlo") {
    auto c = casefile::builtin("case33");
    std::vector<Model> models{sdf_model(c.network)};

    McOptions forced;
    forced.draw = [](int, Scenario const& base) { return base; };
    Report one = monte_carlo("case33", c.network, c.base, models, 1, 0, forced);
    Report base = base_protocol("case33", c.network, c.base, models);
    CHECK(one.find("SDF", "mc")->eps_max == base.find("SDF", "base", 1.0)->eps_max);
    CHECK(one.find("SDF", "mc")->eps_avg == base.find("SDF", "base", 1.0)->eps_avg);

    Scenario s = mc_scenario(c.base, 5, 3);
    for (int i = 0; i < 32; ++i) {
        if (c.base.p[i] == 0.0) continue;
        double u = s.p[i] / c.base.p[i];
        CHECK(u >= 0.0);
        CHECK(u <= 1.5);
        if (c.base.q[i] != 0.0) CHECK(s.q[i] / c.base.q[i] == doctest::Approx(u));
    }

    Report a = monte_carlo("case33", c.network, c.base, models, 50, 11);
    Report b = monte_carlo("case33", c.network, c.base, models, 50, 11);
    Report d = monte_carlo("case33", c.network, c.base, models, 50, 12);
    CHECK(emit_csv(a) == emit_csv(b));
    CHECK(emit_csv(a) != emit_csv(d));
    CHECK(a.find("SDF", "mc")->p_star == 50);
    CHECK(kind_of([&] { monte_carlo("case33", c.network, c.base, models, 0, 1); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("Monte Carlo skips and logs failures") {
    auto c = casefile::builtin("case33");
    McOptions opt;
    opt.draw = [](int i, Scenario const& base) { return i == 1 ? base.scaled(40.0) : base; };
    Report r = monte_carlo("case33", c.network, c.base, {sdf_model(c.network)}, 3, 0, opt);
    CHECK(r.find("SDF", "mc")->p_star == 2);
    CHECK(r.log.size() == 1);
}

TEST_CASE("CSV and JSON output") {
    Report empty;
    CHECK(kind_of([&] { emit_csv(empty); }) == ErrorKind::InvalidArgument);

    auto c = casefile::builtin("case33");
    Report r = base_protocol("case33", c.network, c.base, {sdf_model(c.network)});
    std::string csv = emit_csv(r);
    CHECK(count_of(csv, "\n") == 2);
    CHECK(csv.rfind("feeder,model,protocol,k,p_star,eps_max,eps_avg,seed\n", 0) == 0);
    CHECK(csv.find("case33,SDF,base,1,1,") != std::string::npos);

    // round-trips through %.17g
    std::istringstream in(csv.substr(csv.find('\n') + 1));
    std::string field;
    for (int i = 0; i < 6; ++i) std::getline(in, field, ',');
    CHECK(std::stod(field) == r.rows[0].eps_max);

    auto j = report_json(r);
    CHECK(j["rows"].size() == 1);
    CHECK(j["rows"][0]["model"] == "SDF");
    CHECK(j["metadata"].contains("timestamp"));
}

TEST_CASE("SVG profiles") {
    auto path = std::filesystem::temp_directory_path() / "plpf_profile_test.svg";
    Vector exact = Vector::LinSpaced(32, 1.0, 0.91);
    emit_svg_profiles(path.string(), "case33 base", exact,
                      {{"SDF", exact.array() + 0.002}, {"PLPF", exact.array() + 1e-5}});
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    std::string svg = ss.str();
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(count_of(svg, "<polyline class=\"model\"") == 2);
    CHECK(count_of(svg, "<circle class=\"exact\"") == 32);
    std::filesystem::remove(path);

    CHECK(kind_of([&] { emit_svg_profiles("/nonexistent-dir/x.svg", "t", exact, {}); }) == ErrorKind::IoError);
}
