#include <random>

#include "catch_amalgamated.hpp"
#include "support.hpp"

using namespace testsupport;
using Catch::Matchers::WithinAbs;

TEST_CASE("dimensions reject degenerate shapes", "[core_model]") {
    CHECK_NOTHROW(Dimensions{6, 4, 2, 1}.validate());
    CHECK_THROWS_AS((Dimensions{0, 0, 1, 0}.validate()), DimensionError);
    CHECK_THROWS_AS((Dimensions{2, 2, 1, 0}.validate()), DimensionError);
    CHECK_THROWS_AS((Dimensions{2, 1, 0, 0}.validate()), DimensionError);
    CHECK_THROWS_AS((Dimensions{2, 1, 1, -1}.validate()), DimensionError);
}

TEST_CASE("pack lays out q, v, z, Q, V, Z", "[core_model]") {
    HybridState s{0.0, Vector::Constant(1, 2.0), Vector::Constant(1, 3.0), 5.0, 0};
    SensitivityBundle b{Matrix::Constant(1, 1, 7.0), Matrix::Constant(1, 1, 11.0), RowVector::Constant(1, 13.0), {}};
    Vector x = pack_canonical(s, b);
    Vector expect(6);
    expect << 2, 3, 5, 7, 11, 13;
    CHECK(x == expect);
}

TEST_CASE("five-bar canonical vector has 39 entries", "[core_model]") {
    ModelDefinition m = build_five_bar();
    CHECK(m.dims.canonical_size() == 6 + 6 + 1 + 12 + 12 + 2);
    HybridState s{0.0, Vector::Zero(6), Vector::Zero(6), 0.0, 0};
    SensitivityBundle b{Matrix::Zero(6, 2), Matrix::Zero(6, 2), RowVector::Zero(2), {}};
    CHECK(pack_canonical(s, b).size() == 39);
}

TEST_CASE("pack and unpack round-trip bit for bit", "[core_model]") {
    std::mt19937 gen(7);
    std::normal_distribution<double> nd(0.0, 1e3);
    for (int trial = 0; trial < 20; ++trial) {
        Dimensions d{1 + trial % 5, 0, 1 + trial % 3, 0};
        HybridState s{0.0, Vector::NullaryExpr(d.n, [&] { return nd(gen); }),
                      Vector::NullaryExpr(d.n, [&] { return nd(gen); }), nd(gen), 0};
        SensitivityBundle b{Matrix::NullaryExpr(d.n, d.p, [&] { return nd(gen); }),
                            Matrix::NullaryExpr(d.n, d.p, [&] { return nd(gen); }),
                            RowVector::NullaryExpr(d.p, [&] { return nd(gen); }), {}};
        Vector x = pack_canonical(s, b);
        REQUIRE(x.size() == d.canonical_size());
        HybridState s2;
        SensitivityBundle b2;
        unpack_canonical(x, d, s2, b2);
        CHECK(s2.q == s.q);
        CHECK(s2.v == s.v);
        CHECK(s2.z == s.z);
        CHECK(b2.Q == b.Q);
        CHECK(b2.V == b.V);
        CHECK(b2.Z == b.Z);
        CHECK(pack_canonical(s2, b2) == x);
    }
}

TEST_CASE("event records keep the position", "[core_model]") {
    EventRecord e;
    e.state_pre.q = Vector::Constant(2, 1.0);
    e.state_post.q = e.state_pre.q;
    CHECK_NOTHROW(e.check());
    e.state_post.q(1) = std::nextafter(1.0, 2.0);
    CHECK_THROWS_AS(e.check(), Error);
}

TEST_CASE("five-bar partials pass at the initial configuration", "[core_model]") {
    ModelDefinition m = build_five_bar();
    REQUIRE(m.dims.n == 6);
    REQUIRE(m.dims.m == 4);
    REQUIRE(m.dims.p == 2);
    InitialConditions ic = m.initial_conditions(m.nominal_rho);
    // nonzero velocity so the velocity-dependent partials are exercised
    HybridState probe = feasible_state(m, m.nominal_rho, 1, 0.0);
    probe.q = ic.q0;
    ValidationReport r = validate_model(m, probe, m.nominal_rho);
    INFO(r.summary());
    CHECK(r.pass);
}

TEST_CASE("ball partials are exact", "[core_model]") {
    ModelDefinition m = build_bouncing_ball();
    HybridState probe{0.0, Vector::Constant(1, 0.7), Vector::Constant(1, -1.2), 0.0, 0};
    ValidationReport r = validate_model(m, probe, m.nominal_rho);
    INFO(r.summary());
    CHECK(r.pass);
    for (const auto& e : r.entries)
        if (e.partial == "M_q u" || e.partial == "F_q") CHECK(e.max_rel_error == 0.0);
}

TEST_CASE("validation passes at random feasible probes", "[core_model]") {
    for (auto m : {build_five_bar(), build_pendulum()}) {
        for (unsigned k = 0; k < 10; ++k) {
            HybridState probe = feasible_state(m, m.nominal_rho, 40 + k, m.name == "five_bar" ? 0.05 : 0.4);
            ValidationReport r = validate_model(m, probe, m.nominal_rho);
            INFO(m.name << " probe " << k << "\n" << r.summary());
            CHECK(r.pass);
        }
    }
}

TEST_CASE("validation catches a zeroed force Jacobian", "[core_model]") {
    ModelDefinition m = build_five_bar();
    auto force = m.force;
    m.force = [force](double t, const Vector& q, const Vector& v, const Vector& rho, int regime) {
        ForceEval f = force(t, q, v, rho, regime);
        f.F_q.setZero();
        return f;
    };
    HybridState probe = feasible_state(m, m.nominal_rho, 3, 0.05);
    ValidationReport r = validate_model(m, probe, m.nominal_rho);
    CHECK_FALSE(r.pass);
    bool named = false;
    for (const auto& e : r.entries)
        if (e.partial == "F_q") {
            named = true;
            CHECK_FALSE(e.pass);
            CHECK(e.max_rel_error > 1e-2);
        } else {
            CHECK(e.pass);
        }
    CHECK(named);
    CHECK(r.summary().find("F_q") != std::string::npos);
}

TEST_CASE("wrongly sized callback output is a dimension error", "[core_model]") {
    ModelDefinition m = build_bouncing_ball();
    m.force = [](double, const Vector&, const Vector&, const Vector&, int) {
        return ForceEval{Vector::Zero(2), Matrix::Zero(2, 1), Matrix::Zero(2, 1), Matrix::Zero(2, 1)};
    };
    HybridState probe{0.0, Vector::Constant(1, 0.7), Vector::Constant(1, -1.2), 0.0, 0};
    CHECK_THROWS_AS(validate_model(m, probe, m.nominal_rho), DimensionError);
}
