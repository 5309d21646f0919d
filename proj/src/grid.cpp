#include "dpfl/grid.hpp"
#include "dpfl/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dpfl {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

struct Table {
    std::vector<std::vector<double>> rows;
    int line = 0; // line where the table starts, for diagnostics
};

// Strips % comments, splits statements of the forms
//   mpc.baseMVA = <float>;
//   mpc.<name> = [ rows ];
// Rows are newline- or semicolon-separated whitespace-delimited floats.
struct Parser {
    const std::string& text;
    size_t pos = 0;
    int line = 1;

    explicit Parser(const std::string& t) : text(t) {}

    [[noreturn]] void syntax(const std::string& what) const {
        fail("syntax", what + " (line " + std::to_string(line) + ")");
    }

    bool eof() const { return pos >= text.size(); }

    char peek() const { return text[pos]; }

    void advance() {
        if (text[pos] == '\n') ++line;
        ++pos;
    }

    void skip_ws_and_comments(bool stop_at_newline = false) {
        while (!eof()) {
            char c = peek();
            if (c == '%') {
                while (!eof() && peek() != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                if (stop_at_newline && c == '\n') return;
                advance();
            } else {
                return;
            }
        }
    }

    std::string read_identifier() {
        std::string out;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '.')) {
            out.push_back(peek());
            ++pos;
        }
        return out;
    }

    void expect(char c) {
        skip_ws_and_comments();
        if (eof() || peek() != c) syntax(std::string("expected '") + c + "'");
        advance();
    }

    double read_number() {
        skip_ws_and_comments();
        const char* start = text.c_str() + pos;
        char* end = nullptr;
        double v = std::strtod(start, &end);
        if (end == start) syntax("expected a number");
        pos += static_cast<size_t>(end - start);
        return v;
    }

    Table read_matrix() {
        expect('[');
        Table t;
        t.line = line;
        std::vector<double> row;
        while (true) {
            skip_ws_and_comments(/*stop_at_newline=*/true);
            if (eof()) syntax("unterminated matrix");
            char c = peek();
            if (c == '\n' || c == ';') {
                advance();
                if (!row.empty()) {
                    t.rows.push_back(std::move(row));
                    row.clear();
                }
                continue;
            }
            if (c == ']') {
                advance();
                if (!row.empty()) t.rows.push_back(std::move(row));
                return t;
            }
            row.push_back(read_number());
        }
    }
};

double column(const std::vector<double>& row, size_t idx, const std::string& table, int line) {
    if (idx >= row.size())
        fail("syntax", table + " row has too few columns (line " + std::to_string(line) + ")");
    return row[idx];
}

void validate(const GridCase& c) {
    if (c.base_mva <= 0.0) fail("invalid-case", "baseMVA must be positive");
    std::set<int> ids;
    int slack_count = 0;
    for (const auto& b : c.buses) {
        if (!ids.insert(b.id).second)
            fail("invalid-case", "duplicate bus id " + std::to_string(b.id));
        if (b.type == BusType::Slack) ++slack_count;
    }
    if (slack_count != 1)
        fail("invalid-case", "expected exactly one slack bus, found " + std::to_string(slack_count));
    for (const auto& br : c.branches) {
        if (!ids.count(br.from) || !ids.count(br.to))
            fail("invalid-case", "branch endpoint references unknown bus " +
                                     std::to_string(ids.count(br.from) ? br.to : br.from));
        if (br.r < 0.0)
            fail("invalid-case", "negative branch resistance");
        if (br.in_service && br.x == 0.0 && br.r == 0.0)
            fail("invalid-case", "in-service branch with zero impedance");
    }
    for (const auto& g : c.gens) {
        if (!ids.count(g.bus))
            fail("invalid-case", "generator references unknown bus " + std::to_string(g.bus));
    }
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

int GridCase::bus_index(int id) const {
    for (size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return static_cast<int>(i);
    fail("unknown-bus", "no bus with id " + std::to_string(id));
}

int GridCase::slack_index() const {
    for (size_t i = 0; i < buses.size(); ++i)
        if (buses[i].type == BusType::Slack) return static_cast<int>(i);
    fail("invalid-case", "no slack bus");
}

std::vector<int> GridCase::indices_of(BusType type) const {
    std::vector<int> out;
    for (size_t i = 0; i < buses.size(); ++i)
        if (buses[i].type == type) out.push_back(static_cast<int>(i));
    return out;
}

GridCase parse_matpower_case(const std::string& text) {
    Parser p(text);
    bool has_base = false;
    double base = 0.0;
    std::map<std::string, Table> tables;

    while (true) {
        p.skip_ws_and_comments();
        if (p.eof()) break;
        std::string name = p.read_identifier();
        if (name.rfind("mpc.", 0) != 0) p.syntax("expected statement starting with 'mpc.'");
        std::string field = name.substr(4);
        p.expect('=');
        if (field == "baseMVA") {
            base = p.read_number();
            has_base = true;
        } else {
            tables[field] = p.read_matrix();
        }
        p.expect(';');
    }

    if (!has_base) fail("invalid-case", "missing baseMVA");
    if (base <= 0.0) fail("invalid-case", "baseMVA must be positive");
    for (const char* required : {"bus", "gen", "branch"})
        if (!tables.count(required))
            fail("missing-matrix", std::string("missing matrix: ") + required);

    GridCase c;
    c.base_mva = base;

    const Table& bus_t = tables.at("bus");
    for (const auto& row : bus_t.rows) {
        Bus b;
        b.id = static_cast<int>(column(row, 0, "bus", bus_t.line));
        int type = static_cast<int>(column(row, 1, "bus", bus_t.line));
        switch (type) {
            case 1: b.type = BusType::PQ; break;
            case 2: b.type = BusType::PV; break;
            case 3: b.type = BusType::Slack; break;
            default: fail("invalid-case", "unsupported bus type " + std::to_string(type));
        }
        b.pd = column(row, 2, "bus", bus_t.line) / base;
        b.qd = column(row, 3, "bus", bus_t.line) / base;
        b.gs = column(row, 4, "bus", bus_t.line) / base;
        b.bs = column(row, 5, "bus", bus_t.line) / base;
        b.vm = column(row, 7, "bus", bus_t.line);
        b.va = column(row, 8, "bus", bus_t.line) * kDegToRad;
        if (row.size() >= 13) {
            b.vmax = row[11];
            b.vmin = row[12];
        }
        c.buses.push_back(b);
    }

    const Table& gen_t = tables.at("gen");
    for (const auto& row : gen_t.rows) {
        Generator g;
        g.bus = static_cast<int>(column(row, 0, "gen", gen_t.line));
        g.pg = column(row, 1, "gen", gen_t.line) / base;
        g.qg = column(row, 2, "gen", gen_t.line) / base;
        g.vset = column(row, 5, "gen", gen_t.line);
        c.gens.push_back(g);
    }

    const Table& br_t = tables.at("branch");
    for (const auto& row : br_t.rows) {
        Branch br;
        br.from = static_cast<int>(column(row, 0, "branch", br_t.line));
        br.to = static_cast<int>(column(row, 1, "branch", br_t.line));
        br.r = column(row, 2, "branch", br_t.line);
        br.x = column(row, 3, "branch", br_t.line);
        br.b = column(row, 4, "branch", br_t.line);
        if (row.size() >= 9) {
            double tap = row[8];
            if (tap != 0.0 && tap != 1.0)
                fail("unsupported", "off-nominal transformer tap " + format_number(tap));
        }
        if (row.size() >= 10 && row[9] != 0.0)
            fail("unsupported", "phase-shifting transformer");
        br.in_service = row.size() >= 11 ? row[10] != 0.0 : true;
        c.branches.push_back(br);
    }

    validate(c);
    return c;
}

GridCase load_case(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("io", "cannot open case file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_matpower_case(ss.str());
}

std::string serialize_case(const GridCase& c) {
    std::ostringstream out;
    out << "mpc.baseMVA = " << format_number(c.base_mva) << ";\n";
    out << "mpc.bus = [\n";
    for (const auto& b : c.buses) {
        int type = b.type == BusType::PQ ? 1 : (b.type == BusType::PV ? 2 : 3);
        out << b.id << ' ' << type << ' ' << format_number(b.pd * c.base_mva) << ' '
            << format_number(b.qd * c.base_mva) << ' ' << format_number(b.gs * c.base_mva) << ' '
            << format_number(b.bs * c.base_mva) << " 1 " << format_number(b.vm) << ' '
            << format_number(b.va / kDegToRad) << " 0 1 " << format_number(b.vmax) << ' '
            << format_number(b.vmin) << '\n';
    }
    out << "];\n";
    out << "mpc.gen = [\n";
    for (const auto& g : c.gens) {
        out << g.bus << ' ' << format_number(g.pg * c.base_mva) << ' '
            << format_number(g.qg * c.base_mva) << " 0 0 " << format_number(g.vset)
            << " 100 1 0 0\n";
    }
    out << "];\n";
    out << "mpc.branch = [\n";
    for (const auto& br : c.branches) {
        out << br.from << ' ' << br.to << ' ' << format_number(br.r) << ' ' << format_number(br.x)
            << ' ' << format_number(br.b) << " 0 0 0 0 0 " << (br.in_service ? 1 : 0)
            << " -360 360\n";
    }
    out << "];\n";
    return out.str();
}

Admittance build_admittance(const GridCase& c) {
    const int n = c.n_buses();
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& br : c.branches) {
        if (!br.in_service) continue;
        if (br.r == 0.0 && br.x == 0.0) fail("invalid-case", "zero-impedance branch");
        const int i = c.bus_index(br.from);
        const int j = c.bus_index(br.to);
        const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
        const std::complex<double> sh(0.0, br.b / 2.0);
        Y(i, i) += ys + sh;
        Y(j, j) += ys + sh;
        Y(i, j) -= ys;
        Y(j, i) -= ys;
    }
    for (int i = 0; i < n; ++i) Y(i, i) += std::complex<double>(c.buses[i].gs, c.buses[i].bs);
    return Admittance{Y.real(), Y.imag()};
}

} // namespace dpfl
