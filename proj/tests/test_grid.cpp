#include <doctest.h>

#include "dpfl/error.hpp"
#include "dpfl/grid.hpp"
#include "oracles.hpp"

#include <algorithm>

using namespace dpfl;

namespace {

const char* kTwoBus = R"(mpc.baseMVA = 100;
mpc.bus = [
1 3 0 0 0 0 1 1.0 0 345 1 1.1 0.9
2 1 10 0 0 0 1 1.0 0 345 1 1.1 0.9
];
mpc.gen = [
1 0 0 300 -300 1.0 100 1 250 10
];
mpc.branch = [
1 2 0 0.1 0 250 250 250 0 0 1 -360 360
];
)";

GridCase two_bus() { return parse_matpower_case(kTwoBus); }

} // namespace

TEST_CASE("parses a minimal two-bus case") {
    GridCase c = two_bus();
    CHECK(c.n_buses() == 2);
    CHECK(c.n_branches() == 1);
    CHECK(c.base_mva == 100.0);
    CHECK(c.buses[0].type == BusType::Slack);
    CHECK(c.buses[1].type == BusType::PQ);
    CHECK(c.buses[1].pd == doctest::Approx(0.1)); // 10 MW on a 100 MVA base
    CHECK(c.branches[0].x == 0.1);
    CHECK(c.gens.size() == 1);
}

TEST_CASE("comment lines are ignored") {
    std::string commented = kTwoBus;
    commented.insert(0, "% header comment\n");
    // sprinkle a trailing comment inside the bus matrix
    auto pos = commented.find("345 1 1.1 0.9");
    commented.insert(pos + 13, " % trailing note");
    GridCase a = parse_matpower_case(kTwoBus);
    GridCase b = parse_matpower_case(commented);
    CHECK(serialize_case(a) == serialize_case(b));
}

TEST_CASE("missing branch matrix is reported") {
    std::string text = kTwoBus;
    auto pos = text.find("mpc.branch");
    text = text.substr(0, pos);
    try {
        parse_matpower_case(text);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == "missing-matrix");
        CHECK(std::string(e.what()).find("branch") != std::string::npos);
    }
}

TEST_CASE("rejects zero or negative baseMVA") {
    std::string text = kTwoBus;
    text.replace(text.find("100"), 3, "0");
    CHECK_THROWS_AS(parse_matpower_case(text), Error);
}

TEST_CASE("rejects off-nominal transformer taps") {
    std::string text = kTwoBus;
    text.replace(text.find("250 250 250 0 0 1"), 17, "250 250 250 1.05 0 1");
    try {
        parse_matpower_case(text);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == "unsupported");
    }
}

TEST_CASE("syntax errors carry line numbers") {
    try {
        parse_matpower_case("mpc.baseMVA = ;\n");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == "syntax");
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
}

TEST_CASE("admittance of a single reactance branch") {
    Admittance y = build_admittance(two_bus());
    CHECK(y.G.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(y.B(0, 0) == doctest::Approx(-10.0));
    CHECK(y.B(0, 1) == doctest::Approx(10.0));
    CHECK(y.B(1, 0) == doctest::Approx(10.0));
    CHECK(y.B(1, 1) == doctest::Approx(-10.0));
}

TEST_CASE("out-of-service branch contributes nothing") {
    GridCase c = two_bus();
    c.branches[0].in_service = false;
    Admittance y = build_admittance(c);
    CHECK(y.G.cwiseAbs().maxCoeff() == 0.0);
    CHECK(y.B.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("admittance matches the complex-matrix oracle") {
    GridCase c = two_bus();
    c.branches[0].r = 0.01;
    c.branches[0].b = 0.04;
    c.buses[1].bs = 0.3;
    Admittance y = build_admittance(c);
    Eigen::MatrixXcd ref = oracles::ybus_complex(c);
    CHECK((y.G - ref.real()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((y.B - ref.imag()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("zero-impedance in-service branch is rejected") {
    GridCase c = two_bus();
    c.branches[0].x = 0.0;
    CHECK_THROWS_AS(build_admittance(c), Error);
}

TEST_CASE("admittance is symmetric on reciprocal networks") {
    GridCase c = load_case(std::string(DPFL_CASES_DIR) + "/case9.m");
    Admittance y = build_admittance(c);
    CHECK((y.G - y.G.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((y.B - y.B.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("case round-trips through serialization") {
    GridCase a = load_case(std::string(DPFL_CASES_DIR) + "/case9.m");
    GridCase b = parse_matpower_case(serialize_case(a));
    GridCase c = parse_matpower_case(serialize_case(b));
    CHECK(serialize_case(b) == serialize_case(c));
    CHECK(a.n_buses() == b.n_buses());
    for (int i = 0; i < a.n_buses(); ++i) {
        CHECK(a.buses[i].pd == b.buses[i].pd);
        CHECK(a.buses[i].va == b.buses[i].va);
    }
    for (int k = 0; k < a.n_branches(); ++k) {
        CHECK(a.branches[k].r == b.branches[k].r);
        CHECK(a.branches[k].x == b.branches[k].x);
    }
}

TEST_CASE("bus relabeling permutes admittance rows and columns") {
    GridCase c = load_case(std::string(DPFL_CASES_DIR) + "/case9.m");
    Admittance y = build_admittance(c);

    GridCase p = c;
    std::reverse(p.buses.begin(), p.buses.end());
    Admittance yp = build_admittance(p);

    const int n = c.n_buses();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            CHECK(yp.G(i, j) == doctest::Approx(y.G(n - 1 - i, n - 1 - j)).epsilon(1e-14));
            CHECK(yp.B(i, j) == doctest::Approx(y.B(n - 1 - i, n - 1 - j)).epsilon(1e-14));
        }
}
