#include "plpf/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <queue>
#include <sstream>
#include <unordered_map>

namespace plpf {

Scenario Scenario::zero(int n) { return Scenario{Vector::Zero(n), Vector::Zero(n)}; }

Scenario Scenario::scaled(double k) const { return Scenario{k * p, k * q}; }

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

    std::size_t find(std::size_t i) {
        while (parent_[i] != i) {
            parent_[i] = parent_[parent_[i]];
            i = parent_[i];
        }
        return i;
    }

    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) {
            return false;
        }
        parent_[b] = a;
        return true;
    }

private:
    std::vector<std::size_t> parent_;
};

RadialDiagnostic fail(ErrorKind kind, std::string message, int bus = -1) {
    return RadialDiagnostic{false, kind, std::move(message), bus};
}

template <typename T>
void hash_bytes(std::uint64_t& h, T const& value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
    }
}

void check_length(Network const& net, Vector const& v, char const* what) {
    if (v.size() != net.n()) {
        std::ostringstream os;
        os << what << " has length " << v.size() << ", network has " << net.n() << " non-root buses";
        throw Error(ErrorKind::LengthMismatch, os.str());
    }
}

}  // namespace

RadialDiagnostic validate_radial(std::span<int const> bus_labels, int root_label, std::span<Branch const> branches) {
    std::unordered_map<int, std::size_t> index;
    for (std::size_t i = 0; i < bus_labels.size(); ++i) {
        if (!index.emplace(bus_labels[i], i).second) {
            return fail(ErrorKind::InvalidCase, "bus " + std::to_string(bus_labels[i]) + " is listed twice",
                        bus_labels[i]);
        }
    }
    auto root = index.find(root_label);
    if (root == index.end()) {
        return fail(ErrorKind::InvalidCase, "root bus " + std::to_string(root_label) + " is not in the bus list",
                    root_label);
    }

    DisjointSets sets(bus_labels.size());
    for (std::size_t k = 0; k < branches.size(); ++k) {
        Branch const& br = branches[k];
        auto from = index.find(br.from_bus);
        auto to = index.find(br.to_bus);
        if (from == index.end() || to == index.end()) {
            int missing = from == index.end() ? br.from_bus : br.to_bus;
            return fail(ErrorKind::InvalidCase,
                        "branch " + std::to_string(k) + " references unknown bus " + std::to_string(missing), missing);
        }
        if (br.from_bus == br.to_bus) {
            return fail(ErrorKind::CycleDetected,
                        "branch " + std::to_string(k) + " is a self-loop at bus " + std::to_string(br.from_bus),
                        br.from_bus);
        }
        if (!sets.unite(from->second, to->second)) {
            return fail(ErrorKind::CycleDetected,
                        "branch " + std::to_string(k) + " (" + std::to_string(br.from_bus) + "->" +
                            std::to_string(br.to_bus) + ") closes a loop",
                        br.to_bus);
        }
    }

    std::size_t const root_set = sets.find(root->second);
    for (std::size_t i = 0; i < bus_labels.size(); ++i) {
        if (sets.find(i) != root_set) {
            return fail(ErrorKind::DisconnectedBus,
                        "bus " + std::to_string(bus_labels[i]) + " has no path to the root", bus_labels[i]);
        }
    }
    return RadialDiagnostic{};
}

Network Network::build(std::span<int const> bus_labels, int root_label, std::span<Branch const> branches,
                       double root_voltage_sq, double base_mva) {
    RadialDiagnostic diag = validate_radial(bus_labels, root_label, branches);
    if (!diag) {
        throw Error(diag.kind, diag.message);
    }
    if (!(root_voltage_sq > 0.0) || !std::isfinite(root_voltage_sq)) {
        throw Error(ErrorKind::InvalidCase, "root squared voltage must be positive");
    }

    Network net;
    net.root_voltage_sq_ = root_voltage_sq;
    net.base_mva_ = base_mva;

    std::size_t const count = bus_labels.size();
    net.labels_.reserve(count);
    net.labels_.push_back(root_label);
    for (int label : bus_labels) {
        if (label != root_label) {
            net.labels_.push_back(label);
        }
    }
    std::unordered_map<int, int> internal;
    for (std::size_t i = 0; i < count; ++i) {
        internal.emplace(net.labels_[i], static_cast<int>(i));
    }

    struct Edge {
        int other;
        std::size_t branch;
    };
    std::vector<std::vector<Edge>> adjacency(count);
    for (std::size_t k = 0; k < branches.size(); ++k) {
        int a = internal.at(branches[k].from_bus);
        int b = internal.at(branches[k].to_bus);
        adjacency[static_cast<std::size_t>(a)].push_back({b, k});
        adjacency[static_cast<std::size_t>(b)].push_back({a, k});
    }

    int const n = static_cast<int>(count) - 1;
    net.parent_.assign(count, -1);
    net.r_ = Vector::Zero(n);
    net.x_ = Vector::Zero(n);
    std::vector<bool> seen(count, false);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = true;
    while (!frontier.empty()) {
        int bus = frontier.front();
        frontier.pop();
        for (Edge const& e : adjacency[static_cast<std::size_t>(bus)]) {
            if (seen[static_cast<std::size_t>(e.other)]) {
                continue;
            }
            seen[static_cast<std::size_t>(e.other)] = true;
            Branch const& br = branches[e.branch];
            if (!(br.r >= 0.0) || !std::isfinite(br.r) || !std::isfinite(br.x)) {
                throw Error(ErrorKind::InvalidCase, "branch " + std::to_string(e.branch) +
                                                        " needs finite impedance with r >= 0");
            }
            net.parent_[static_cast<std::size_t>(e.other)] = bus;
            net.r_[e.other - 1] = br.r;
            net.x_[e.other - 1] = br.x;
            frontier.push(e.other);
        }
    }
    net.finalize();
    return net;
}

Network Network::from_parents(std::vector<int> const& parent, Vector const& r, Vector const& x,
                              double root_voltage_sq, double base_mva) {
    int const n = static_cast<int>(parent.size()) - 1;
    if (n < 1 || r.size() != n || x.size() != n) {
        throw Error(ErrorKind::LengthMismatch, "parent, r and x must describe the same n >= 1 branches");
    }
    std::vector<int> labels(parent.size());
    std::iota(labels.begin(), labels.end(), 0);
    std::vector<Branch> branches;
    branches.reserve(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        branches.push_back({parent[static_cast<std::size_t>(i)], i, r[i - 1], x[i - 1]});
    }
    return build(labels, 0, branches, root_voltage_sq, base_mva);
}

void Network::finalize() {
    std::size_t const count = parent_.size();
    std::vector<int> degree(count, 0);
    for (std::size_t i = 1; i < count; ++i) {
        ++degree[static_cast<std::size_t>(parent_[i])];
    }
    child_offsets_.assign(count + 1, 0);
    for (std::size_t i = 0; i < count; ++i) {
        child_offsets_[i + 1] = child_offsets_[i] + degree[i];
    }
    child_list_.assign(count - 1, 0);
    std::vector<int> fill(child_offsets_.begin(), child_offsets_.end() - 1);
    for (std::size_t i = 1; i < count; ++i) {
        auto p = static_cast<std::size_t>(parent_[i]);
        child_list_[static_cast<std::size_t>(fill[p]++)] = static_cast<int>(i);
    }

    order_.clear();
    order_.reserve(count - 1);
    std::vector<int> stack{0};
    std::size_t head = 0;
    // breadth-first over the child lists
    while (head < stack.size()) {
        int bus = stack[head++];
        for (int c : children(bus)) {
            stack.push_back(c);
            order_.push_back(c);
        }
    }
}

std::span<int const> Network::children(int bus) const {
    auto b = static_cast<std::size_t>(bus);
    return std::span<int const>(child_list_).subspan(static_cast<std::size_t>(child_offsets_[b]),
                                                      static_cast<std::size_t>(child_offsets_[b + 1] - child_offsets_[b]));
}

std::vector<Branch> Network::branches() const {
    std::vector<Branch> out;
    out.reserve(static_cast<std::size_t>(n()));
    for (int i = 1; i <= n(); ++i) {
        out.push_back({parent(i), i, r_[i - 1], x_[i - 1]});
    }
    return out;
}

std::string Network::fingerprint() const {
    std::uint64_t h = 14695981039346656037ULL;
    hash_bytes(h, static_cast<std::int64_t>(n()));
    for (int p : parent_) {
        hash_bytes(h, static_cast<std::int64_t>(p));
    }
    for (int i = 0; i < n(); ++i) {
        hash_bytes(h, r_[i]);
        hash_bytes(h, x_[i]);
    }
    hash_bytes(h, root_voltage_sq_);
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

Incidence build_incidence(Network const& net) {
    int const n = net.n();
    Incidence inc{Vector::Zero(n), Matrix::Zero(n, n)};
    for (int j = 1; j <= n; ++j) {
        int const row = j - 1;
        int const from = net.parent(j);
        if (from == 0) {
            inc.m0[row] = 1.0;
        } else {
            inc.M(row, from - 1) = 1.0;
        }
        inc.M(row, j - 1) = -1.0;
    }
    return inc;
}

Vector apply_m_inv_t(Network const& net, Vector const& nodal, std::size_t* edge_visits) {
    check_length(net, nodal, "nodal vector");
    Vector acc = nodal;
    auto order = net.order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        int const bus = *it;
        int const up = net.parent(bus);
        if (up != 0) {
            acc[up - 1] += acc[bus - 1];
        }
    }
    if (edge_visits != nullptr) {
        *edge_visits += order.size();
    }
    return -acc;
}

Vector apply_m_inv(Network const& net, Vector const& branch, std::size_t* edge_visits) {
    check_length(net, branch, "branch vector");
    Vector out(net.n());
    for (int bus : net.order()) {
        int const up = net.parent(bus);
        double const upstream = up == 0 ? 0.0 : out[up - 1];
        out[bus - 1] = upstream + branch[bus - 1];
    }
    if (edge_visits != nullptr) {
        *edge_visits += net.order().size();
    }
    return -out;
}

Vector apply_m(Network const& net, Vector const& nodal) {
    check_length(net, nodal, "nodal vector");
    Vector out(net.n());
    for (int j = 1; j <= net.n(); ++j) {
        int const up = net.parent(j);
        out[j - 1] = (up == 0 ? 0.0 : nodal[up - 1]) - nodal[j - 1];
    }
    return out;
}

}  // namespace plpf
