#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "plpf/threephase.hpp"

using namespace plpf;
using namespace plpf::tp;
using cd = std::complex<double>;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (Error const& e) {
        return e.kind();
    }
    return ErrorKind::LengthMismatch;
}

Eigen::MatrixXcd diag_z(std::vector<cd> const& d, double mutual = 0.0) {
    auto k = static_cast<Eigen::Index>(d.size());
    Eigen::MatrixXcd Z = Eigen::MatrixXcd::Constant(k, k, cd(mutual, mutual));
    for (Eigen::Index i = 0; i < k; ++i) Z(i, i) = d[static_cast<std::size_t>(i)];
    return Z;
}

// root 0 (abc) - 1 (abc) - 2 (abc); 1 - 3 (ac); 3 - 4 (c); 2 - 5 (b)
ThreePhaseNetwork mixed_feeder() {
    std::vector<Bus3> buses{{0, PhaseSet::all()},         {1, PhaseSet::all()},         {2, PhaseSet::all()},
                            {3, PhaseSet::parse("ac")}, {4, PhaseSet::parse("c")}, {5, PhaseSet::parse("b")}};
    std::vector<Line3> lines{
        {0, 1, PhaseSet::all(), {diag_z({{0.01, 0.02}, {0.012, 0.021}, {0.011, 0.019}}, 0.004)}},
        {1, 2, PhaseSet::all(), {diag_z({{0.02, 0.03}, {0.018, 0.032}, {0.021, 0.028}}, 0.005)}},
        {3, 1, PhaseSet::parse("ac"), {diag_z({{0.03, 0.02}, {0.031, 0.024}}, 0.003)}},
        {3, 4, PhaseSet::parse("c"), {diag_z({{0.04, 0.03}})}},
        {2, 5, PhaseSet::parse("b"), {diag_z({{0.05, 0.02}})}},
    };
    return ThreePhaseNetwork::build(buses, 0, {1.0, 1.02, 0.99}, lines);
}

}  // namespace

TEST_CASE("phase sets") {
    PhaseSet ac = PhaseSet::parse("ca");
    CHECK(ac.to_string() == "ac");
    CHECK(ac.size() == 2);
    CHECK(ac.index_of(Phase::a) == 0);
    CHECK(ac.index_of(Phase::b) == -1);
    CHECK(ac.index_of(Phase::c) == 1);
    CHECK(ac.subset_of(PhaseSet::all()));
    CHECK_FALSE(PhaseSet::all().subset_of(ac));
    CHECK(kind_of([] { PhaseSet::parse(""); }) == ErrorKind::InvalidCase);
    CHECK(kind_of([] { PhaseSet::parse("ad"); }) == ErrorKind::InvalidCase);
}

TEST_CASE("single three-phase line") {
    auto net = ThreePhaseNetwork::build({{0, PhaseSet::all()}, {1, PhaseSet::all()}}, 0, {1.0, 1.0, 1.0},
                                        {{0, 1, PhaseSet::all(), {diag_z({{0.05, 0.05}, {0.05, 0.05}, {0.05, 0.05}}, 0.01)}}});
    Incidence3 inc = build_3p_incidence(net);
    CHECK(inc.M == -Matrix::Identity(3, 3));
    CHECK(inc.M0 == Matrix::Identity(3, 3));
}

TEST_CASE("single-phase incidence is recovered") {
    std::mt19937_64 rng(4);
    Network net1 = oracle::random_tree(rng, 9);
    std::vector<Bus3> buses;
    std::vector<Line3> lines;
    for (int i = 0; i <= 9; ++i) buses.push_back({i, PhaseSet::parse("a")});
    for (Branch const& br : net1.branches()) {
        lines.push_back({br.from_bus, br.to_bus, PhaseSet::parse("a"), {diag_z({{br.r, br.x}})}});
    }
    auto net3 = ThreePhaseNetwork::build(buses, 0, {net1.root_voltage_sq()}, lines);
    Incidence inc1 = build_incidence(net1);
    Incidence3 inc3 = build_3p_incidence(net3);
    CHECK(inc3.M == inc1.M);
    CHECK(inc3.M0.col(0) == inc1.m0);
}

TEST_CASE("unreached bus-phase") {
    auto net = ThreePhaseNetwork::build({{0, PhaseSet::all()}, {1, PhaseSet::all()}}, 0, {1.0, 1.0, 1.0},
                                        {{0, 1, PhaseSet::parse("ab"), {diag_z({{0.05, 0.05}, {0.05, 0.05}})}}});
    CHECK(kind_of([&] { build_3p_incidence(net); }) == ErrorKind::UnreachedBusPhase);
    CHECK(kind_of([&] { plpf3_assemble(net, Vector::Zero(2)); }) == ErrorKind::SingularM);
}

TEST_CASE("phase consistency is enforced") {
    auto build = [](std::string line_phases, std::vector<cd> z) {
        return ThreePhaseNetwork::build({{0, PhaseSet::all()}, {1, PhaseSet::parse("ab")}}, 0, {1.0, 1.0, 1.0},
                                        {{0, 1, PhaseSet::parse(line_phases), {diag_z(z)}}});
    };
    CHECK(kind_of([&] { build("abc", {{0.1, 0.1}, {0.1, 0.1}, {0.1, 0.1}}); }) == ErrorKind::InvalidCase);
    CHECK(kind_of([&] { build("ab", {{0.1, 0.1}}); }) == ErrorKind::InvalidCase);
    CHECK(kind_of([&] { build("ab", {{0.1, 0.1}, {0.0, 0.0}}); }) == ErrorKind::InvalidCase);
    CHECK(kind_of([] {
              ThreePhaseNetwork::build({{0, PhaseSet::all()}, {1, PhaseSet::all()}}, 0, {1.0},
                                       {{0, 1, PhaseSet::parse("a"), {diag_z({{0.1, 0.1}})}}});
          }) == ErrorKind::LengthMismatch);
}

TEST_CASE("singleton phases reproduce the single-phase model") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        Network net1 = oracle::random_tree(rng, 15);
        Scenario s = oracle::random_loads(rng, 15, 0.05);
        Vector alpha = Vector::Random(15) * 0.08;
        std::vector<Bus3> buses;
        std::vector<Line3> lines;
        for (int i = 0; i <= 15; ++i) buses.push_back({i, PhaseSet::parse("b")});
        for (Branch const& br : net1.branches()) {
            lines.push_back({br.from_bus, br.to_bus, PhaseSet::parse("b"), {diag_z({{br.r, br.x}})}});
        }
        auto net3 = ThreePhaseNetwork::build(buses, 0, {net1.root_voltage_sq()}, lines);
        auto sys = plpf3_assemble(net3, alpha);
        CHECK(sys.Rhat.rows() == 15);
        auto v3 = plpf3_solve(net3, sys, s.p, s.q);
        auto v1 = lin::plpf_solve(lin::plpf_assemble(net1, lin::AlphaVector::from(alpha)), s, net1.root_voltage_sq());
        CHECK(v3.v == v1.v);
        CHECK(v3.V == v1.V);
    }
}

TEST_CASE("balanced feeder gives identical phases") {
    double const r = 0.05, x = 0.05;
    auto net = ThreePhaseNetwork::build({{0, PhaseSet::all()}, {1, PhaseSet::all()}}, 0, {1.0, 1.0, 1.0},
                                        {{0, 1, PhaseSet::all(), {diag_z({{r, x}, {r, x}, {r, x}}, 0.01)}}});
    Vector alpha = Vector::Constant(3, -0.02);
    Vector p = Vector::Constant(3, -0.1);
    Vector q = Vector::Constant(3, -0.05);
    auto v = plpf3_solve(net, plpf3_assemble(net, alpha), p, q);
    Network single = Network::from_parents({-1, 0}, Vector::Constant(1, r), Vector::Constant(1, x));
    Scenario s = Scenario::zero(1);
    s.p[0] = -0.1;
    s.q[0] = -0.05;
    double expected = lin::plpf_apply(single, Vector::Constant(1, -0.02), s).v[0];
    for (int k = 0; k < 3; ++k) CHECK(v.v[k] == doctest::Approx(expected).epsilon(1e-15));
    CHECK(v.v[0] == v.v[1]);
    CHECK(v.v[1] == v.v[2]);
}

TEST_CASE("zero alpha is the factor-two drop per phase") {
    auto net = ThreePhaseNetwork::build({{0, PhaseSet::all()}, {1, PhaseSet::all()}}, 0, {1.0, 1.01, 0.98},
                                        {{0, 1, PhaseSet::all(), {diag_z({{0.05, 0.04}, {0.03, 0.06}, {0.02, 0.01}}, 0.02)}}});
    Vector p(3), q(3);
    p << -0.1, -0.2, -0.05;
    q << -0.03, -0.01, -0.02;
    auto v = plpf3_solve(net, plpf3_assemble(net, Vector::Zero(3)), p, q);
    CHECK(v.v[0] == doctest::Approx(1.0 - 2 * (0.05 * 0.1 + 0.04 * 0.03)).epsilon(1e-14));
    CHECK(v.v[1] == doctest::Approx(1.01 - 2 * (0.03 * 0.2 + 0.06 * 0.01)).epsilon(1e-14));
    CHECK(v.v[2] == doctest::Approx(0.98 - 2 * (0.02 * 0.05 + 0.01 * 0.02)).epsilon(1e-14));
}

TEST_CASE("block system agrees with the per-phase solve") {
    auto net = mixed_feeder();
    auto const L = static_cast<Eigen::Index>(net.line_phase_index().size());
    auto const B = static_cast<Eigen::Index>(net.bus_phase_index().size());
    CHECK(L == 3 + 3 + 2 + 1 + 1);
    CHECK(B == L);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> load(-0.1, 0.0);
    std::uniform_real_distribution<double> alpha_draw(-0.09, 0.0);
    Vector p(B), q(B), alpha(L);
    for (Eigen::Index i = 0; i < B; ++i) {
        p[i] = load(rng);
        q[i] = load(rng);
    }
    for (Eigen::Index i = 0; i < L; ++i) alpha[i] = alpha_draw(rng);

    auto sys = plpf3_assemble(net, alpha);
    CHECK(sys.Rhat.rows() == L);
    CHECK(sys.Rhat.cols() == B);
    Vector v0(3);
    v0 << 1.0, 1.02, 0.99;
    Vector rhs = sys.Rhat * p + sys.Xhat * q - sys.incidence.M0 * v0;
    Vector dense = sys.incidence.M.fullPivLu().solve(rhs);
    auto v = plpf3_solve(net, sys, p, q);
    CHECK((v.v - dense).cwiseAbs().maxCoeff() <= 1e-13);

    // no cross-phase leakage: changing phase-b injections leaves a and c alone
    Vector p2 = p;
    for (Eigen::Index i = 0; i < B; ++i) {
        if (net.bus_phase_index()[static_cast<std::size_t>(i)].phase == Phase::b) p2[i] *= 3.0;
    }
    auto v2 = plpf3_solve(net, sys, p2, q);
    for (Eigen::Index i = 0; i < B; ++i) {
        bool is_b = net.bus_phase_index()[static_cast<std::size_t>(i)].phase == Phase::b;
        if (is_b) CHECK(v2.v[i] != v.v[i]);
        else CHECK(v2.v[i] == v.v[i]);
    }
}

TEST_CASE("relabelling phases permutes the solution") {
    // swap a and c everywhere
    auto swap = [](std::string s) {
        for (char& ch : s) ch = ch == 'a' ? 'c' : ch == 'c' ? 'a' : ch;
        return PhaseSet::parse(s);
    };
    auto reverse = [](Eigen::MatrixXcd const& Z) { return Eigen::MatrixXcd(Z.colwise().reverse().rowwise().reverse()); };
    auto build = [&](bool swapped) {
        std::vector<Bus3> buses{{0, PhaseSet::all()}, {1, PhaseSet::all()}, {2, PhaseSet::parse("ab")}, {3, PhaseSet::parse("c")}};
        std::vector<Line3> lines{{0, 1, PhaseSet::all(), {diag_z({{0.01, 0.02}, {0.03, 0.01}, {0.02, 0.05}}, 0.004)}},
                                 {1, 2, PhaseSet::parse("ab"), {diag_z({{0.04, 0.02}, {0.01, 0.03}}, 0.002)}},
                                 {1, 3, PhaseSet::parse("c"), {diag_z({{0.02, 0.02}})}}};
        if (swapped) {
            for (auto& b : buses) b.phases = swap(b.phases.to_string());
            for (auto& l : lines) {
                // swapping a and c reverses the in-block phase order of every line
                l.impedance.Z = reverse(l.impedance.Z);
                l.phases = swap(l.phases.to_string());
            }
            return ThreePhaseNetwork::build(buses, 0, {0.97, 1.0, 1.03}, lines);
        }
        return ThreePhaseNetwork::build(buses, 0, {1.03, 1.0, 0.97}, lines);
    };
    auto original = build(false);
    auto swapped = build(true);
    auto entries = [](ThreePhaseNetwork const& net, std::vector<std::tuple<int, char, double>> const& values) {
        Vector out = Vector::Zero(static_cast<Eigen::Index>(net.bus_phase_index().size()));
        for (auto [bus, ph, val] : values) {
            for (std::size_t i = 0; i < net.bus_phase_index().size(); ++i) {
                auto e = net.bus_phase_index()[i];
                if (e.index == bus && to_char(e.phase) == ph) out[static_cast<Eigen::Index>(i)] = val;
            }
        }
        return out;
    };
    std::vector<std::tuple<int, char, double>> p_orig{{1, 'a', -0.1}, {1, 'b', -0.05}, {1, 'c', -0.07},
                                                      {2, 'a', -0.02}, {2, 'b', -0.03}, {3, 'c', -0.04}};
    std::vector<std::tuple<int, char, double>> p_swap;
    for (auto [bus, ph, val] : p_orig) p_swap.emplace_back(bus, ph == 'a' ? 'c' : ph == 'c' ? 'a' : ph, val);

    Vector p1 = entries(original, p_orig);
    Vector p2 = entries(swapped, p_swap);
    Vector alpha1 = Vector::Constant(static_cast<Eigen::Index>(original.line_phase_index().size()), -0.03);
    auto v1 = plpf3_solve(original, plpf3_assemble(original, alpha1), p1, 0.5 * p1);
    auto v2 = plpf3_solve(swapped, plpf3_assemble(swapped, alpha1), p2, 0.5 * p2);
    for (auto [bus, ph, val] : p_orig) {
        (void)val;
        char other = ph == 'a' ? 'c' : ph == 'c' ? 'a' : ph;
        double a = 0, b = 0;
        for (std::size_t i = 0; i < original.bus_phase_index().size(); ++i) {
            auto e = original.bus_phase_index()[i];
            if (e.index == bus && to_char(e.phase) == ph) a = v1.v[static_cast<Eigen::Index>(i)];
        }
        for (std::size_t i = 0; i < swapped.bus_phase_index().size(); ++i) {
            auto e = swapped.bus_phase_index()[i];
            if (e.index == bus && to_char(e.phase) == other) b = v2.v[static_cast<Eigen::Index>(i)];
        }
        CHECK(a == b);
    }
}

TEST_CASE("argument checks") {
    auto net = mixed_feeder();
    CHECK(kind_of([&] { plpf3_assemble(net, Vector::Zero(3)); }) == ErrorKind::LengthMismatch);
    CHECK(kind_of([&] { plpf3_assemble(net, Vector::Constant(10, 1.5)); }) == ErrorKind::InvalidArgument);
    CHECK(plpf3_assemble(net, Vector::Constant(10, -0.2)).large_alpha);
    auto sys = plpf3_assemble(net, Vector::Zero(10));
    CHECK(kind_of([&] { plpf3_solve(net, sys, Vector::Zero(4), Vector::Zero(4)); }) == ErrorKind::LengthMismatch);
}

TEST_CASE("JSON feeders") {
    auto j = nlohmann::json::parse(R"({
        "root": 10, "v0": [1.0, 1.0],
        "buses": [{"id": 10, "phases": "ab"}, {"id": 20, "phases": "ab"}, {"id": 30, "phases": "b"}],
        "lines": [
            {"from": 10, "to": 20, "phases": "ab", "r": [[0.02, 0.005], [0.005, 0.03]], "x": [[0.04, 0.01], [0.01, 0.05]]},
            {"from": 30, "to": 20, "phases": "b", "r": [[0.01]], "x": [[0.02]]}
        ]})");
    auto net = ThreePhaseNetwork::from_json(j);
    CHECK(net.n() == 2);
    CHECK(net.bus_phases(2).to_string() == "b");
    CHECK(net.line_into(2).from_bus == 1);
    CHECK(net.line_into(1).impedance.Z(1, 1) == cd(0.03, 0.05));
    CHECK(build_3p_incidence(net).M.rows() == 3);

    auto path = std::filesystem::temp_directory_path() / "plpf_feeder3.json";
    std::ofstream(path) << j.dump();
    CHECK(ThreePhaseNetwork::load(path.string()).n() == 2);
    std::filesystem::remove(path);
    CHECK(kind_of([] { ThreePhaseNetwork::load("/nonexistent/feeder.json"); }) == ErrorKind::IoError);

    auto bad = j;
    bad["lines"][0]["r"] = {{0.02}};
    CHECK(kind_of([&] { ThreePhaseNetwork::from_json(bad); }) == ErrorKind::InvalidCase);
    bad = j;
    bad.erase("v0");
    CHECK(kind_of([&] { ThreePhaseNetwork::from_json(bad); }) == ErrorKind::InvalidCase);
    bad = j;
    bad["lines"].push_back({{"from", 10}, {"to", 30}, {"phases", "b"}, {"r", {{0.1}}}, {"x", {{0.1}}}});
    CHECK(kind_of([&] { ThreePhaseNetwork::from_json(bad); }) == ErrorKind::CycleDetected);
}
