#include "plpf/acpf.hpp"

#include <cmath>
#include <complex>
#include <vector>

namespace plpf::acpf {

namespace {

using Complex = std::complex<double>;

void check_shapes(Network const& net, Scenario const& s) {
    if (s.p.size() != net.n() || s.q.size() != net.n()) {
        throw Error(ErrorKind::LengthMismatch, "scenario length " + std::to_string(s.p.size()) + "/" +
                                                   std::to_string(s.q.size()) + " does not match n = " +
                                                   std::to_string(net.n()));
    }
}

// Branch currents from bus voltages; index 0 is the root.
std::vector<Complex> currents(Network const& net, std::vector<Complex> const& V) {
    std::vector<Complex> J(V.size());
    for (int j = 1; j <= net.n(); ++j) {
        Complex z(net.r()[j - 1], net.x()[j - 1]);
        J[static_cast<std::size_t>(j)] = (V[static_cast<std::size_t>(net.parent(j))] - V[static_cast<std::size_t>(j)]) / z;
    }
    return J;
}

double mismatch(Network const& net, Scenario const& s, std::vector<Complex> const& V,
                std::vector<Complex> const& J) {
    double worst = 0.0;
    for (int i = 1; i <= net.n(); ++i) {
        Complex out = -J[static_cast<std::size_t>(i)];
        for (int c : net.children(i)) out += J[static_cast<std::size_t>(c)];
        Complex injected = V[static_cast<std::size_t>(i)] * std::conj(out);
        double e = std::abs(Complex(s.p[i - 1], s.q[i - 1]) - injected);
        if (!(e <= worst)) worst = e;  // propagates NaN
    }
    return worst;
}

}  // namespace

AcSolution solve(Network const& net, Scenario const& s, AcOptions const& opt) {
    check_shapes(net, s);
    int const n = net.n();
    for (int j = 1; j <= n; ++j) {
        if (net.r()[j - 1] == 0.0 && net.x()[j - 1] == 0.0) {
            throw Error(ErrorKind::ZeroImpedanceBranch, "branch into bus " + std::to_string(net.label(j)));
        }
    }
    auto const count = static_cast<std::size_t>(n) + 1;
    std::vector<Complex> V(count, Complex(std::sqrt(net.root_voltage_sq()), 0.0));
    std::vector<Complex> J(count);
    auto order = net.order();

    double res = 0.0;
    int it = 0;
    while (true) {
        ++it;
        std::fill(J.begin(), J.end(), Complex{});
        for (auto b = order.rbegin(); b != order.rend(); ++b) {
            auto j = static_cast<std::size_t>(*b);
            J[j] -= std::conj(Complex(s.p[*b - 1], s.q[*b - 1]) / V[j]);
            J[static_cast<std::size_t>(net.parent(*b))] += J[j];
        }
        for (int b : order) {
            auto j = static_cast<std::size_t>(b);
            V[j] = V[static_cast<std::size_t>(net.parent(b))] - Complex(net.r()[b - 1], net.x()[b - 1]) * J[j];
        }
        res = mismatch(net, s, V, currents(net, V));
        if (res <= opt.tol) break;
        if (!std::isfinite(res) || it >= opt.max_iter) {
            throw NonConvergence(it, res);
        }
    }

    J = currents(net, V);
    AcSolution sol;
    sol.v.resize(n);
    sol.V.resize(n);
    sol.delta.resize(n);
    sol.P.resize(n);
    sol.Q.resize(n);
    sol.ell.resize(n);
    for (int j = 1; j <= n; ++j) {
        auto u = static_cast<std::size_t>(j);
        Complex const Vj = V[u];
        Complex const S = V[static_cast<std::size_t>(net.parent(j))] * std::conj(J[u]);
        sol.V[j - 1] = std::abs(Vj);
        sol.v[j - 1] = std::norm(Vj);
        sol.delta[j - 1] = std::arg(Vj);
        sol.P[j - 1] = S.real();
        sol.Q[j - 1] = S.imag();
        sol.ell[j - 1] = std::norm(J[u]);
    }
    sol.iterations = it;
    sol.residual = res;
    return sol;
}

double residual(Network const& net, Scenario const& s, AcSolution const& sol) {
    check_shapes(net, s);
    int const n = net.n();
    if (sol.V.size() != n || sol.delta.size() != n) {
        throw Error(ErrorKind::LengthMismatch, "solution does not match the network");
    }
    std::vector<Complex> V(static_cast<std::size_t>(n) + 1);
    V[0] = Complex(std::sqrt(net.root_voltage_sq()), 0.0);
    for (int j = 1; j <= n; ++j) V[static_cast<std::size_t>(j)] = std::polar(sol.V[j - 1], sol.delta[j - 1]);
    return mismatch(net, s, V, currents(net, V));
}

}  // namespace plpf::acpf
