#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace dpfl {

enum class BusType { PQ, PV, Slack };

struct Bus {
    int id = 0;
    BusType type = BusType::PQ;
    double pd = 0.0;   ///< active load, p.u. on system base
    double qd = 0.0;   ///< reactive load, p.u.
    double gs = 0.0;   ///< shunt conductance, p.u.
    double bs = 0.0;   ///< shunt susceptance, p.u.
    double vm = 1.0;   ///< voltage magnitude, p.u.
    double va = 0.0;   ///< voltage angle, rad
    double vmin = 0.9;
    double vmax = 1.1;
};

struct Branch {
    int from = 0;      ///< bus id of the from terminal
    int to = 0;        ///< bus id of the to terminal
    double r = 0.0;    ///< series resistance, p.u.
    double x = 0.0;    ///< series reactance, p.u.
    double b = 0.0;    ///< total line charging susceptance, p.u.
    bool in_service = true;
};

struct Generator {
    int bus = 0;
    double pg = 0.0;   ///< active injection, p.u.
    double qg = 0.0;   ///< reactive injection, p.u.
    double vset = 1.0; ///< voltage setpoint, p.u.
};

/// Parsed network case. All quantities are per-unit on base_mva; immutable
/// by convention once built, so it can be shared freely across workers.
struct GridCase {
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> gens;

    int n_buses() const { return static_cast<int>(buses.size()); }
    int n_branches() const { return static_cast<int>(branches.size()); }

    /// Index of the bus with the given external id; throws "unknown-bus".
    int bus_index(int id) const;
    /// Index of the unique slack bus.
    int slack_index() const;
    std::vector<int> indices_of(BusType type) const;
};

/// Real and imaginary parts of the nodal admittance matrix.
struct Admittance {
    Eigen::MatrixXd G;
    Eigen::MatrixXd B;
};

/// Parse the MATPOWER-style subset grammar:
///   mpc.baseMVA = <float>;
///   mpc.<name> = [ <whitespace-separated rows, newline-terminated> ];
/// `%` starts a comment. Required tables: bus, gen, branch. Loads and
/// generator injections are converted to per-unit on baseMVA. Branches with
/// off-nominal tap or nonzero phase shift are rejected.
GridCase parse_matpower_case(const std::string& text);

/// Load and parse a case file from disk.
GridCase load_case(const std::string& path);

/// Render a GridCase back into the case grammar. parse(serialize(c)) == c.
std::string serialize_case(const GridCase& c);

/// Standard Y-bus assembly from series impedance, line charging and bus
/// shunts; out-of-service branches contribute nothing.
Admittance build_admittance(const GridCase& c);

} // namespace dpfl
