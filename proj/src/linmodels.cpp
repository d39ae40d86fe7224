#include "plpf/linmodels.hpp"

#include <cmath>
#include <sstream>

namespace plpf::lin {

namespace {

void check_scenario(Network const& net, Scenario const& s) {
    if (s.p.size() != net.n() || s.q.size() != net.n()) {
        throw Error(ErrorKind::LengthMismatch, "scenario does not match the network");
    }
}

void check_alpha(Network const& net, Vector const& a) {
    if (a.size() != net.n()) {
        throw Error(ErrorKind::LengthMismatch,
                    "alpha has length " + std::to_string(a.size()) + ", expected " + std::to_string(net.n()));
    }
}

Voltages finish(Vector v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0)) {
            std::ostringstream os;
            os << "bus " << i + 1 << " has v = " << v[i];
            throw Error(ErrorKind::NegativeSquaredVoltage, os.str());
        }
    }
    Vector V = v.cwiseSqrt();
    return Voltages{std::move(v), std::move(V)};
}

}  // namespace

Vector branch_drop(Network const& net, Scenario const& s) {
    check_scenario(net, s);
    return net.r().cwiseProduct(apply_m_inv_t(net, s.p)) + net.x().cwiseProduct(apply_m_inv_t(net, s.q));
}

Vector sdistflow_solve(Network const& net, Scenario const& s) {
    Vector w = branch_drop(net, s);
    return Vector::Constant(net.n(), net.root_voltage_sq()) + 2.0 * apply_m_inv(net, w);
}

AlphaVector exact_alpha(Network const& net, Scenario const& s, Vector const& ell, double eps_denom) {
    check_alpha(net, ell);
    Vector const& r = net.r();
    Vector const& x = net.x();
    Vector num = 2.0 * (r.cwiseProduct(apply_m_inv_t(net, r.cwiseProduct(ell))) +
                        x.cwiseProduct(apply_m_inv_t(net, x.cwiseProduct(ell)))) +
                 (r.cwiseAbs2() + x.cwiseAbs2()).cwiseProduct(ell);
    Vector den = branch_drop(net, s);
    AlphaVector out = AlphaVector::zero(net.n());
    for (int l = 0; l < net.n(); ++l) {
        if (std::abs(den[l]) < eps_denom) {
            out.guarded[static_cast<std::size_t>(l)] = true;
        } else {
            out.alpha[l] = num[l] / den[l];
        }
    }
    return out;
}

Vector approx_ell(Network const& net, Vector const& V) {
    check_alpha(net, V);
    Vector z2 = net.r().cwiseAbs2() + net.x().cwiseAbs2();
    for (int l = 0; l < net.n(); ++l) {
        if (z2[l] == 0.0) {
            throw Error(ErrorKind::ZeroImpedanceBranch, "branch into bus " + std::to_string(net.label(l + 1)));
        }
    }
    Vector shifted = V - Vector::Constant(net.n(), std::sqrt(net.root_voltage_sq()));
    Vector drop = apply_m(net, shifted);
    return drop.cwiseAbs2().cwiseQuotient(z2);
}

Vector voltage_ratio_alpha(Network const& net, Vector const& V) {
    check_alpha(net, V);
    Vector out(net.n());
    double const root = std::sqrt(net.root_voltage_sq());
    for (int j = 1; j <= net.n(); ++j) {
        int const i = net.parent(j);
        out[j - 1] = (i == 0 ? root : V[i - 1]) / V[j - 1] - 1.0;
    }
    return out;
}

Vector lambda_from_alpha(Vector const& alpha, LambdaMode mode) {
    if (mode == LambdaMode::binomial) {
        return Vector::Ones(alpha.size()) - alpha;
    }
    Vector out(alpha.size());
    for (Eigen::Index i = 0; i < alpha.size(); ++i) {
        if (alpha[i] == -1.0) {
            throw Error(ErrorKind::SingularLambda, "alpha = -1 at branch " + std::to_string(i));
        }
        out[i] = 1.0 / (1.0 + alpha[i]);
    }
    return out;
}

PlpfMatrices plpf_assemble(Network const& net, AlphaVector const& alpha_hat) {
    check_alpha(net, alpha_hat.alpha);
    int const n = net.n();
    PlpfMatrices m{Matrix(n, n), Matrix(n, n), false};
    for (int l = 0; l < n; ++l) {
        double a = std::abs(alpha_hat.alpha[l]);
        if (!(a <= 1.0)) {
            throw Error(ErrorKind::InvalidArgument,
                        "|alpha| > 1 at branch " + std::to_string(l) + " (" + std::to_string(alpha_hat.alpha[l]) + ")");
        }
        if (a >= 0.1) m.large_alpha = true;
    }
    Vector lam = Vector::Constant(n, 2.0) - alpha_hat.alpha;
    Vector lr = lam.cwiseProduct(net.r());
    Vector lx = lam.cwiseProduct(net.x());
    Vector e = Vector::Zero(n);
    for (int j = 0; j < n; ++j) {
        e[j] = 1.0;
        Vector col = apply_m_inv_t(net, e);
        m.Rhat.col(j) = apply_m_inv(net, lr.cwiseProduct(col));
        m.Xhat.col(j) = apply_m_inv(net, lx.cwiseProduct(col));
        e[j] = 0.0;
    }
    return m;
}

Voltages plpf_solve(PlpfMatrices const& mats, Scenario const& s, double v0) {
    if (s.p.size() != mats.Rhat.cols() || s.q.size() != mats.Xhat.cols()) {
        throw Error(ErrorKind::LengthMismatch, "scenario does not match the model matrices");
    }
    return finish(Vector::Constant(mats.Rhat.rows(), v0) + mats.Rhat * s.p + mats.Xhat * s.q);
}

Voltages plpf_apply(Network const& net, Vector const& alpha_hat, Scenario const& s) {
    check_alpha(net, alpha_hat);
    Vector w = branch_drop(net, s);
    Vector lam = Vector::Constant(net.n(), 2.0) - alpha_hat;
    return finish(Vector::Constant(net.n(), net.root_voltage_sq()) + apply_m_inv(net, lam.cwiseProduct(w)));
}

}  // namespace plpf::lin
