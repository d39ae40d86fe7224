#include "plpf/threephase.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace plpf::tp {

char to_char(Phase p) { return static_cast<char>('a' + static_cast<int>(p)); }

PhaseSet PhaseSet::parse(std::string_view text) {
    std::uint8_t bits = 0;
    for (char ch : text) {
        if (ch < 'a' || ch > 'c') {
            throw Error(ErrorKind::InvalidCase, "unknown phase '" + std::string(1, ch) + "' in \"" + std::string(text) + "\"");
        }
        bits |= static_cast<std::uint8_t>(1u << (ch - 'a'));
    }
    if (bits == 0) throw Error(ErrorKind::InvalidCase, "empty phase set");
    return PhaseSet(bits);
}

int PhaseSet::size() const { return std::popcount(bits_); }

int PhaseSet::index_of(Phase p) const {
    if (!contains(p)) return -1;
    return std::popcount(static_cast<std::uint8_t>(bits_ & ((1u << static_cast<int>(p)) - 1u)));
}

std::vector<Phase> PhaseSet::phases() const {
    std::vector<Phase> out;
    for (int k = 0; k < 3; ++k) {
        if (contains(static_cast<Phase>(k))) out.push_back(static_cast<Phase>(k));
    }
    return out;
}

std::string PhaseSet::to_string() const {
    std::string s;
    for (Phase p : phases()) s += to_char(p);
    return s;
}

ThreePhaseNetwork ThreePhaseNetwork::build(std::vector<Bus3> const& buses, int root_id,
                                           std::vector<double> const& root_v0, std::vector<Line3> const& lines) {
    std::unordered_map<int, PhaseSet> phase_of;
    std::vector<int> labels;
    for (Bus3 const& b : buses) {
        if (b.phases.empty()) throw Error(ErrorKind::InvalidCase, "bus " + std::to_string(b.id) + " has no phases");
        if (!phase_of.emplace(b.id, b.phases).second) {
            throw Error(ErrorKind::InvalidCase, "duplicate bus " + std::to_string(b.id));
        }
        labels.push_back(b.id);
    }
    if (!phase_of.contains(root_id)) throw Error(ErrorKind::InvalidCase, "root bus " + std::to_string(root_id) + " not listed");
    PhaseSet root_phases = phase_of.at(root_id);
    if (static_cast<int>(root_v0.size()) != root_phases.size()) {
        throw Error(ErrorKind::LengthMismatch, "root has " + std::to_string(root_phases.size()) + " phases but " +
                                                   std::to_string(root_v0.size()) + " voltages");
    }

    std::vector<Branch> branches;
    for (Line3 const& line : lines) {
        std::string where = "line " + std::to_string(line.from_bus) + "-" + std::to_string(line.to_bus);
        if (!phase_of.contains(line.from_bus) || !phase_of.contains(line.to_bus)) {
            throw Error(ErrorKind::InvalidCase, where + " references an unknown bus");
        }
        if (line.phases.empty()) throw Error(ErrorKind::InvalidCase, where + " has no phases");
        if (!line.phases.subset_of(phase_of.at(line.from_bus)) || !line.phases.subset_of(phase_of.at(line.to_bus))) {
            throw Error(ErrorKind::InvalidCase, where + " carries phases its buses lack");
        }
        auto const& Z = line.impedance.Z;
        int k = line.phases.size();
        if (Z.rows() != k || Z.cols() != k) {
            throw Error(ErrorKind::InvalidCase, where + " impedance must be " + std::to_string(k) + "x" + std::to_string(k));
        }
        for (int d = 0; d < k; ++d) {
            if (Z(d, d) == std::complex<double>(0.0) || !(Z(d, d).real() >= 0.0)) {
                throw Error(ErrorKind::InvalidCase, where + " needs nonzero self impedance with r >= 0");
            }
        }
        if (!Z.allFinite()) throw Error(ErrorKind::InvalidCase, where + " has non-finite impedance");
        branches.push_back({line.from_bus, line.to_bus, 0.0, 0.0});
    }

    ThreePhaseNetwork net;
    net.topology_ = Network::build(labels, root_id, branches);
    int const n = net.topology_.n();
    std::unordered_map<int, int> internal;
    for (int i = 0; i <= n; ++i) internal.emplace(net.topology_.label(i), i);

    net.bus_phases_.resize(static_cast<std::size_t>(n + 1));
    for (int i = 0; i <= n; ++i) net.bus_phases_[static_cast<std::size_t>(i)] = phase_of.at(net.topology_.label(i));
    net.lines_.resize(static_cast<std::size_t>(n));
    for (Line3 const& line : lines) {
        int a = internal.at(line.from_bus);
        int b = internal.at(line.to_bus);
        Line3 oriented = line;
        if (net.topology_.parent(b) == a) {
            oriented.from_bus = a;
            oriented.to_bus = b;
        } else {
            oriented.from_bus = b;
            oriented.to_bus = a;
        }
        net.lines_[static_cast<std::size_t>(oriented.to_bus - 1)] = std::move(oriented);
    }
    auto root_list = root_phases.phases();
    for (std::size_t k = 0; k < root_list.size(); ++k) {
        net.root_v0_[static_cast<std::size_t>(root_list[k])] = root_v0[k];
    }
    for (int j = 1; j <= n; ++j) {
        for (Phase p : net.bus_phases(j).phases()) net.bus_index_.push_back({j, p});
        for (Phase p : net.line_into(j).phases.phases()) net.line_index_.push_back({j, p});
    }
    return net;
}

namespace {

Eigen::MatrixXd matrix_field(nlohmann::json const& j, int k, std::string const& where) {
    Eigen::MatrixXd m(k, k);
    if (!j.is_array() || static_cast<int>(j.size()) != k) {
        throw Error(ErrorKind::InvalidCase, where + " must be " + std::to_string(k) + "x" + std::to_string(k));
    }
    for (int r = 0; r < k; ++r) {
        auto const& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != k) {
            throw Error(ErrorKind::InvalidCase, where + " must be " + std::to_string(k) + "x" + std::to_string(k));
        }
        for (int c = 0; c < k; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

}  // namespace

ThreePhaseNetwork ThreePhaseNetwork::from_json(nlohmann::json const& j) {
    std::vector<Bus3> buses;
    std::vector<Line3> lines;
    int root = 0;
    std::vector<double> v0;
    try {
        root = j.at("root").get<int>();
        v0 = j.at("v0").get<std::vector<double>>();
        for (auto const& b : j.at("buses")) {
            buses.push_back({b.at("id").get<int>(), PhaseSet::parse(b.at("phases").get<std::string>())});
        }
        for (auto const& l : j.at("lines")) {
            Line3 line;
            line.from_bus = l.at("from").get<int>();
            line.to_bus = l.at("to").get<int>();
            line.phases = PhaseSet::parse(l.at("phases").get<std::string>());
            int k = line.phases.size();
            std::string where = "line " + std::to_string(line.from_bus) + "-" + std::to_string(line.to_bus);
            Eigen::MatrixXd r = matrix_field(l.at("r"), k, where + " r");
            Eigen::MatrixXd x = matrix_field(l.at("x"), k, where + " x");
            line.impedance.Z = r.cast<std::complex<double>>() + std::complex<double>(0.0, 1.0) * x.cast<std::complex<double>>();
            lines.push_back(std::move(line));
        }
    } catch (nlohmann::json::exception const& e) {
        throw Error(ErrorKind::InvalidCase, std::string("three-phase feeder: ") + e.what());
    }
    return build(buses, root, v0, lines);
}

ThreePhaseNetwork ThreePhaseNetwork::load(std::string const& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (nlohmann::json::parse_error const& e) {
        throw Error(ErrorKind::SyntaxError, path + ": " + e.what());
    }
    return from_json(j);
}

std::optional<Network> ThreePhaseNetwork::induced(Phase p) const {
    int const n = this->n();
    std::vector<int> sub(static_cast<std::size_t>(n + 1), -1);
    std::vector<int> parent{-1};
    std::vector<double> r;
    std::vector<double> x;
    sub[0] = 0;
    for (int j = 1; j <= n; ++j) {
        if (!bus_phases(j).contains(p)) continue;
        Line3 const& line = line_into(j);
        int k = line.phases.index_of(p);
        if (k < 0) {
            throw Error(ErrorKind::UnreachedBusPhase,
                        "bus " + std::to_string(topology_.label(j)) + " phase " + std::string(1, to_char(p)) + " is not fed");
        }
        sub[static_cast<std::size_t>(j)] = static_cast<int>(parent.size());
        parent.push_back(sub[static_cast<std::size_t>(topology_.parent(j))]);
        r.push_back(line.impedance.Z(k, k).real());
        x.push_back(line.impedance.Z(k, k).imag());
    }
    if (r.empty()) return std::nullopt;
    return Network::from_parents(parent, Eigen::Map<Vector>(r.data(), static_cast<Eigen::Index>(r.size())),
                                 Eigen::Map<Vector>(x.data(), static_cast<Eigen::Index>(x.size())), root_v0(p));
}

namespace {

struct Blocks {
    Incidence3 inc;
    std::optional<PhaseIndex> unreached;
};

Blocks incidence_blocks(ThreePhaseNetwork const& net) {
    auto const& rows = net.line_phase_index();
    auto const& cols = net.bus_phase_index();
    PhaseSet root = net.bus_phases(0);
    std::unordered_map<long, int> col_of;
    for (std::size_t c = 0; c < cols.size(); ++c) col_of.emplace(cols[c].index * 3L + static_cast<int>(cols[c].phase), static_cast<int>(c));

    Blocks b{{Matrix::Zero(static_cast<Eigen::Index>(rows.size()), root.size()),
              Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()))},
             std::nullopt};
    for (std::size_t l = 0; l < rows.size(); ++l) {
        auto const row = static_cast<Eigen::Index>(l);
        int j = rows[l].index;
        Phase p = rows[l].phase;
        int i = net.topology().parent(j);
        b.inc.M(row, col_of.at(j * 3L + static_cast<int>(p))) = -1.0;
        if (i == 0) {
            b.inc.M0(row, root.index_of(p)) = 1.0;
        } else {
            b.inc.M(row, col_of.at(i * 3L + static_cast<int>(p))) = 1.0;
        }
    }
    for (PhaseIndex const& c : cols) {
        if (!net.line_into(c.index).phases.contains(c.phase)) {
            b.unreached = c;
            break;
        }
    }
    return b;
}

std::string describe(ThreePhaseNetwork const& net, PhaseIndex at) {
    return "bus " + std::to_string(net.topology().label(at.index)) + " phase " + std::string(1, to_char(at.phase));
}

}  // namespace

Incidence3 build_3p_incidence(ThreePhaseNetwork const& net) {
    Blocks b = incidence_blocks(net);
    if (b.unreached) throw Error(ErrorKind::UnreachedBusPhase, describe(net, *b.unreached) + " is not fed by any line");
    return std::move(b.inc);
}

Plpf3System plpf3_assemble(ThreePhaseNetwork const& net, Vector const& alpha_hat) {
    auto const& rows = net.line_phase_index();
    if (alpha_hat.size() != static_cast<Eigen::Index>(rows.size())) {
        throw Error(ErrorKind::LengthMismatch, "alpha has " + std::to_string(alpha_hat.size()) + " entries, expected " +
                                                   std::to_string(rows.size()) + " line-phases");
    }
    Plpf3System sys;
    sys.alpha = alpha_hat;
    for (Eigen::Index l = 0; l < alpha_hat.size(); ++l) {
        double a = std::abs(alpha_hat[l]);
        if (!(a <= 1.0)) throw Error(ErrorKind::InvalidArgument, "|alpha| > 1 at line-phase " + std::to_string(l));
        if (a >= 0.1) sys.large_alpha = true;
    }

    Blocks b = incidence_blocks(net);
    if (b.unreached) throw Error(ErrorKind::SingularM, "M is singular: " + describe(net, *b.unreached) + " is not fed");
    Eigen::FullPivLU<Matrix> lu(b.inc.M.transpose());
    if (!lu.isInvertible()) throw Error(ErrorKind::SingularM, "M is singular");
    Matrix m_inv_t = lu.inverse();

    Vector lr(alpha_hat.size());
    Vector lx(alpha_hat.size());
    for (std::size_t l = 0; l < rows.size(); ++l) {
        Line3 const& line = net.line_into(rows[l].index);
        auto z = line.impedance.Z(line.phases.index_of(rows[l].phase), line.phases.index_of(rows[l].phase));
        double lam = 2.0 - alpha_hat[static_cast<Eigen::Index>(l)];
        lr[static_cast<Eigen::Index>(l)] = lam * z.real();
        lx[static_cast<Eigen::Index>(l)] = lam * z.imag();
    }
    sys.Rhat = lr.asDiagonal() * m_inv_t;
    sys.Xhat = lx.asDiagonal() * m_inv_t;
    sys.incidence = std::move(b.inc);

    for (int k = 0; k < 3; ++k) {
        auto p = static_cast<Phase>(k);
        auto sub = net.induced(p);
        if (!sub) continue;
        std::vector<double> a;
        for (std::size_t l = 0; l < rows.size(); ++l) {
            if (rows[l].phase == p) a.push_back(alpha_hat[static_cast<Eigen::Index>(l)]);
        }
        sys.per_phase[static_cast<std::size_t>(k)] =
            lin::plpf_assemble(*sub, lin::AlphaVector::from(Eigen::Map<Vector>(a.data(), static_cast<Eigen::Index>(a.size()))));
    }
    return sys;
}

lin::Voltages plpf3_solve(ThreePhaseNetwork const& net, Plpf3System const& sys, Vector const& p, Vector const& q) {
    auto const& cols = net.bus_phase_index();
    auto const B = static_cast<Eigen::Index>(cols.size());
    if (p.size() != B || q.size() != B) {
        throw Error(ErrorKind::LengthMismatch, "injections need " + std::to_string(B) + " bus-phase entries");
    }
    lin::Voltages out{Vector(B), Vector(B)};
    for (int k = 0; k < 3; ++k) {
        auto const& mats = sys.per_phase[static_cast<std::size_t>(k)];
        if (!mats) continue;
        std::vector<Eigen::Index> at;
        for (Eigen::Index c = 0; c < B; ++c) {
            if (static_cast<int>(cols[static_cast<std::size_t>(c)].phase) == k) at.push_back(c);
        }
        Scenario s = Scenario::zero(static_cast<int>(at.size()));
        for (std::size_t e = 0; e < at.size(); ++e) {
            s.p[static_cast<Eigen::Index>(e)] = p[at[e]];
            s.q[static_cast<Eigen::Index>(e)] = q[at[e]];
        }
        lin::Voltages v = lin::plpf_solve(*mats, s, net.root_v0(static_cast<Phase>(k)));
        for (std::size_t e = 0; e < at.size(); ++e) {
            out.v[at[e]] = v.v[static_cast<Eigen::Index>(e)];
            out.V[at[e]] = v.V[static_cast<Eigen::Index>(e)];
        }
    }
    return out;
}

}  // namespace plpf::tp
