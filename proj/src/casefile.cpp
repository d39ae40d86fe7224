#include "plpf/casefile.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "embedded_cases.hpp"

namespace plpf::casefile {

namespace {

struct MatrixRow {
    std::vector<double> values;
    int line = 0;
};

struct MatrixBlock {
    std::vector<MatrixRow> rows;
    int line = 0;
};

std::string located(int line, int col, std::string const& what) {
    return "line " + std::to_string(line) + ", col " + std::to_string(col) + ": " + what;
}

std::string_view strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\'') {
            quoted = !quoted;
        } else if (line[i] == '%' && !quoted) {
            return line.substr(0, i);
        }
    }
    return line;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::optional<double> to_number(std::string_view token) {
    if (!token.empty() && token.front() == '+') {
        token.remove_prefix(1);
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        return std::nullopt;
    }
    return value;
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    RawCase run() {
        std::size_t pos = 0;
        while (pos <= text_.size()) {
            std::size_t end = text_.find('\n', pos);
            if (end == std::string_view::npos) end = text_.size();
            ++line_;
            std::string_view raw = text_.substr(pos, end - pos);
            if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
            consume_line(strip_comment(raw), raw);
            pos = end + 1;
        }
        if (matrix_name_) {
            throw Error(ErrorKind::SyntaxError,
                        located(matrix_line_, matrix_col_, "matrix mpc." + *matrix_name_ + " is never closed with ']'"));
        }
        if (cell_depth_ > 0) {
            throw Error(ErrorKind::SyntaxError, located(line_, 1, "cell array is never closed with '}'"));
        }
        return assemble();
    }

private:
    void consume_line(std::string_view line, std::string_view raw) {
        if (matrix_name_) {
            scan_matrix(line, column_of(raw, line));
            return;
        }
        if (cell_depth_ > 0) {
            skip_cell(line);
            return;
        }
        std::string_view body = trim(line);
        if (body.empty() || body.starts_with("function")) {
            return;
        }
        if (!body.starts_with("mpc.")) {
            out_.warnings.push_back("line " + std::to_string(line_) + ": ignored statement");
            return;
        }
        std::size_t eq = body.find('=');
        if (eq == std::string_view::npos) {
            out_.warnings.push_back("line " + std::to_string(line_) + ": ignored statement");
            return;
        }
        std::string name(trim(body.substr(4, eq - 4)));
        bool valid_name = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
        });
        if (!valid_name) {
            // indexed assignments such as mpc.bus(:, 3) = ... are not supported
            out_.warnings.push_back("line " + std::to_string(line_) + ": ignored statement on mpc");
            return;
        }
        std::string_view rest = trim(body.substr(eq + 1));
        int const rest_col = static_cast<int>(rest.data() - raw.data()) + 1;
        if (rest.starts_with('[')) {
            matrix_name_ = name;
            matrix_line_ = line_;
            matrix_col_ = rest_col;
            current_ = MatrixBlock{{}, line_};
            row_ = MatrixRow{{}, line_};
            scan_matrix(rest.substr(1), rest_col + 1);
        } else if (rest.starts_with('{')) {
            out_.warnings.push_back("skipped section mpc." + name);
            skip_cell(rest);
        } else if (rest.starts_with('\'')) {
            if (name != "version") {
                out_.warnings.push_back("skipped section mpc." + name);
            }
        } else {
            std::string_view value = rest;
            if (value.ends_with(';')) value.remove_suffix(1);
            value = trim(value);
            auto number = to_number(value);
            if (!number) {
                throw Error(ErrorKind::SyntaxError,
                            located(line_, rest_col, "expected a number for mpc." + name + ", got '" +
                                                         std::string(value) + "'"));
            }
            scalars_[name] = *number;
        }
    }

    static int column_of(std::string_view raw, std::string_view part) {
        return static_cast<int>(part.data() - raw.data()) + 1;
    }

    void skip_cell(std::string_view line) {
        for (char c : line) {
            if (c == '{') ++cell_depth_;
            if (c == '}') --cell_depth_;
        }
    }

    void end_row() {
        if (!row_.values.empty()) {
            current_.rows.push_back(std::move(row_));
        }
        row_ = MatrixRow{{}, line_};
    }

    void scan_matrix(std::string_view line, int col0) {
        std::size_t i = 0;
        if (row_.values.empty()) row_.line = line_;
        while (i < line.size()) {
            char c = line[i];
            if (is_space(c) || c == ',') {
                ++i;
                continue;
            }
            if (c == ';') {
                end_row();
                ++i;
                continue;
            }
            if (c == ']') {
                end_row();
                std::string_view tail = trim(line.substr(i + 1));
                if (!tail.empty() && tail != ";") {
                    throw Error(ErrorKind::SyntaxError,
                                located(line_, col0 + static_cast<int>(i) + 1, "unexpected text after ']'"));
                }
                matrices_[*matrix_name_] = std::move(current_);
                matrix_name_.reset();
                return;
            }
            std::size_t j = i;
            while (j < line.size() && !is_space(line[j]) && line[j] != ',' && line[j] != ';' && line[j] != ']') {
                ++j;
            }
            std::string_view token = line.substr(i, j - i);
            if (token == "...") {
                i = j;
                continue;
            }
            auto number = to_number(token);
            if (!number) {
                throw Error(ErrorKind::NonNumericField,
                            "mpc." + *matrix_name_ + " row " + std::to_string(current_.rows.size() + 1) + ", col " +
                                std::to_string(row_.values.size() + 1) + " ('" + std::string(token) + "', line " +
                                std::to_string(line_) + ")");
            }
            row_.values.push_back(*number);
            i = j;
        }
        // a line break also terminates a row
        end_row();
    }

    MatrixBlock const& require(std::string const& name) const {
        auto it = matrices_.find(name);
        if (it == matrices_.end()) {
            throw Error(ErrorKind::MissingSection, name);
        }
        return it->second;
    }

    static void require_columns(MatrixRow const& row, std::size_t count, std::string const& name) {
        if (row.values.size() < count) {
            throw Error(ErrorKind::SyntaxError,
                        located(row.line, 1, "mpc." + name + " row needs at least " + std::to_string(count) +
                                                 " columns, found " + std::to_string(row.values.size())));
        }
    }

    static int as_int(double v, MatrixRow const& row, std::string const& name) {
        if (std::floor(v) != v) {
            throw Error(ErrorKind::SyntaxError, located(row.line, 1, "mpc." + name + " expects an integer id"));
        }
        return static_cast<int>(v);
    }

    RawCase assemble() {
        auto base = scalars_.find("baseMVA");
        if (base == scalars_.end()) {
            throw Error(ErrorKind::MissingSection, "baseMVA");
        }
        out_.base_mva = base->second;

        for (MatrixRow const& row : require("bus").rows) {
            require_columns(row, 9, "bus");
            auto const& v = row.values;
            BusRow bus;
            bus.id = as_int(v[0], row, "bus");
            bus.type = as_int(v[1], row, "bus");
            bus.pd = v[2];
            bus.qd = v[3];
            bus.vm = v[7];
            bus.va = v[8];
            bus.base_kv = v.size() > 9 ? v[9] : 0.0;
            out_.buses.push_back(bus);
        }
        for (MatrixRow const& row : require("branch").rows) {
            require_columns(row, 4, "branch");
            auto const& v = row.values;
            BranchRow br;
            br.from = as_int(v[0], row, "branch");
            br.to = as_int(v[1], row, "branch");
            br.r = v[2];
            br.x = v[3];
            br.status = v.size() > 10 ? as_int(v[10], row, "branch") : 1;
            out_.branches.push_back(br);
        }

        auto slack = std::find_if(out_.buses.begin(), out_.buses.end(), [](BusRow const& b) { return b.type == 3; });
        if (auto gen = matrices_.find("gen"); gen != matrices_.end() && slack != out_.buses.end()) {
            for (MatrixRow const& row : gen->second.rows) {
                auto const& v = row.values;
                bool in_service = v.size() <= 7 || v[7] > 0;
                if (v.size() > 5 && static_cast<int>(v[0]) == slack->id && in_service) {
                    out_.slack_vg = v[5];
                    break;
                }
            }
        }
        for (auto const& [name, block] : matrices_) {
            if (name != "bus" && name != "branch" && name != "gen") {
                out_.warnings.push_back("skipped section mpc." + name);
            }
        }
        return std::move(out_);
    }

    std::string_view text_;
    int line_ = 0;
    RawCase out_;
    std::map<std::string, double> scalars_;
    std::map<std::string, MatrixBlock> matrices_;
    std::optional<std::string> matrix_name_;
    int matrix_line_ = 0;
    int matrix_col_ = 0;
    MatrixBlock current_;
    MatrixRow row_;
    int cell_depth_ = 0;
};

std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

RawCase parse_matpower(std::string_view text) { return Parser(text).run(); }

std::string to_matpower(RawCase const& raw, std::string_view name) {
    std::ostringstream os;
    os << "function mpc = " << name << "\n\nmpc.version = '2';\nmpc.baseMVA = " << fmt(raw.base_mva) << ";\n\n";
    os << "%% bus data\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\nmpc.bus = [\n";
    for (BusRow const& b : raw.buses) {
        os << '\t' << b.id << '\t' << b.type << '\t' << fmt(b.pd) << '\t' << fmt(b.qd) << "\t0\t0\t1\t" << fmt(b.vm)
           << '\t' << fmt(b.va) << '\t' << fmt(b.base_kv) << ";\n";
    }
    os << "];\n\n";
    if (raw.slack_vg) {
        auto slack = std::find_if(raw.buses.begin(), raw.buses.end(), [](BusRow const& b) { return b.type == 3; });
        if (slack != raw.buses.end()) {
            os << "%% generator data\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\nmpc.gen = [\n\t" << slack->id
               << "\t0\t0\t0\t0\t" << fmt(*raw.slack_vg) << "\t" << fmt(raw.base_mva) << "\t1;\n];\n\n";
        }
    }
    os << "%% branch data\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\nmpc.branch = [\n";
    for (BranchRow const& br : raw.branches) {
        os << '\t' << br.from << '\t' << br.to << '\t' << fmt(br.r) << '\t' << fmt(br.x) << "\t0\t0\t0\t0\t0\t0\t"
           << br.status << ";\n";
    }
    os << "];\n";
    return os.str();
}

LoadedCase to_network(RawCase const& raw) {
    if (!(raw.base_mva > 0.0)) {
        throw Error(ErrorKind::InvalidCase, "baseMVA must be positive");
    }
    std::vector<BusRow const*> slacks;
    for (BusRow const& b : raw.buses) {
        if (b.type == 3) slacks.push_back(&b);
    }
    if (slacks.size() != 1) {
        throw Error(ErrorKind::InvalidCase,
                    "expected exactly one slack bus (type 3), found " + std::to_string(slacks.size()));
    }
    BusRow const& slack = *slacks.front();

    std::vector<int> labels;
    labels.reserve(raw.buses.size());
    for (BusRow const& b : raw.buses) labels.push_back(b.id);
    std::vector<Branch> branches;
    for (BranchRow const& br : raw.branches) {
        if (br.status != 0) {
            branches.push_back({br.from, br.to, br.r, br.x});
        }
    }
    double const vm = raw.slack_vg.value_or(slack.vm);
    Network net = Network::build(labels, slack.id, branches, vm * vm, raw.base_mva);

    std::map<int, BusRow const*> by_label;
    for (BusRow const& b : raw.buses) by_label[b.id] = &b;
    Scenario base = Scenario::zero(net.n());
    for (int i = 1; i <= net.n(); ++i) {
        BusRow const& b = *by_label.at(net.label(i));
        base.p[i - 1] = -b.pd / raw.base_mva;
        base.q[i - 1] = -b.qd / raw.base_mva;
    }
    return LoadedCase{std::move(net), std::move(base)};
}

std::vector<std::string> builtin_names() {
    std::vector<std::string> names;
    for (auto const& c : embedded_cases()) names.emplace_back(c.name);
    return names;
}

std::string_view builtin_text(std::string_view name) {
    for (auto const& c : embedded_cases()) {
        if (c.name == name) return c.text;
    }
    throw Error(ErrorKind::UnknownCase, std::string(name));
}

LoadedCase builtin(std::string_view name) { return to_network(parse_matpower(builtin_text(name))); }

LoadedCase load_case(std::string_view source) {
    for (auto const& c : embedded_cases()) {
        if (c.name == source) return builtin(source);
    }
    std::ifstream in{std::string(source), std::ios::binary};
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot read case file '" + std::string(source) + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return to_network(parse_matpower(buf.str()));
}

}  // namespace plpf::casefile
