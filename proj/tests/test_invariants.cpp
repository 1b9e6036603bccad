#include <catch_amalgamated.hpp>

#include <sstream>

#include <tensorpole/invariants.hpp>

using namespace tensorpole;
using namespace tensorpole::invariants;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("simpson rule is exact for cubics, adaptive rule converges") {
    CHECK_THAT(quadrature::simpson([](double x) { return x * x * x - 2 * x + 1; }, 0.0, 2.0, 11), WithinAbs(4.0 - 4.0 + 2.0, 1e-13));
    CHECK_THAT(quadrature::simpson([](double x) { return std::sin(x); }, 0.0, pi, 201), WithinAbs(2.0, 1e-8));
    CHECK_THAT(quadrature::adaptive_simpson([](double x) { return std::exp(x); }, 0.0, 1.0), WithinAbs(std::exp(1.0) - 1.0, 1e-11));
    CHECK_THAT(quadrature::adaptive_simpson([](double x) { return std::sqrt(x); }, 0.0, 1.0, 1e-10), WithinAbs(2.0 / 3.0, 1e-8));
    CHECK_THROWS_AS(quadrature::simpson_weights(0.0, 1.0, 10), ConfigError);
}

TEST_CASE("metric route gives one at zero field") {
    CHECK_THAT(dd_metric(2.0, 0.0, 201), WithinAbs(1.0, 1e-6));
    CHECK_THAT(dd_metric(7.3, 0.0, 401), WithinAbs(1.0, 1e-7));
    CHECK_THAT(dd_metric(2.0, 0.0, 11), WithinAbs(1.0, 1e-3));
    CHECK_THROWS_AS(dd_metric(2.0, 0.0, 9), ConfigError);
    CHECK_THROWS_AS(dd_metric(2.0, 0.0, 200), ConfigError);
}

TEST_CASE("metric route below and above the transition") {
    // frozen from this implementation: no closed form exists for the field-dependent G
    CHECK_THAT(dd_metric(2.0, 1.0), WithinRel(1.01657549253, 1e-9));
    CHECK_THAT(dd_metric(2.0, 3.0), WithinRel(0.163386191398, 1e-9));
    CHECK_THAT(dd_metric(2.0, 4.0), WithinRel(0.0733721073521, 1e-9));
    CHECK_THAT(dd_metric(2.0, 1.0), WithinAbs(1.0, 0.02));
    // sharp drop across h = 1
    CHECK(dd_metric(2.0, 1.98) > 1.0);
    CHECK(dd_metric(2.0, 2.02) < 0.7);
    CHECK_THROWS_AS(dd_metric(2.0, 2.0), NumericalError);
}

TEST_CASE("connection route boundary form equals the closed-form B") {
    for (double h : {0.0, 0.25, 0.5, 0.75, 0.9})
        CHECK_THAT(dd_connection(2.0, 2.0 * h).boundary, WithinAbs(1.0, 1e-9));
    CHECK_THAT(dd_connection(2.0, 2.0).boundary, WithinAbs(-1.0 / 3.0, 1e-9));
    for (double h : {1.2, 1.5, 2.0, 3.0})
        CHECK_THAT(dd_connection(2.0, 2.0 * h).boundary, WithinAbs(-0.5 * (1.0 - h / std::sqrt(h * h + 8.0)), 1e-9));
}

TEST_CASE("connection route quadrature agrees with its boundary form") {
    for (double h : {0.0, 0.5, 0.9, 0.99, 1.001, 1.5, 3.0}) {
        const auto r = dd_connection(2.0, 2.0 * h);
        REQUIRE(r.quadrature.has_value());
        CHECK_THAT(*r.quadrature, WithinAbs(r.boundary, 1e-8));
    }
    const auto at_one = dd_connection(2.0, 2.0);
    CHECK_FALSE(at_one.quadrature.has_value());
    CHECK_FALSE(at_one.note.empty());
}

TEST_CASE("closed-form B") {
    CHECK(b_analytic(0.3) == 1.0);
    CHECK_THAT(b_analytic(1.0), WithinAbs(-1.0 / 3.0, 1e-15));
    CHECK_THAT(b_analytic(2.0), WithinAbs(-0.5 * (1.0 - 2.0 / std::sqrt(12.0)), 1e-15));
    CHECK_THROWS_AS(b_analytic(-0.1), ConfigError);
    // decays toward zero from below for large fields
    CHECK(b_analytic(50.0) < 0.0);
    CHECK(b_analytic(50.0) > -1e-3);
}

TEST_CASE("displacement transition") {
    CHECK_THAT(dd_displacement(2.0, 1.0), WithinAbs(1.0, 0.01));
    CHECK_THAT(dd_displacement(2.0, 3.0), WithinAbs(0.0, 0.01));
    CHECK_THAT(dd_displacement(2.0, -1.0), WithinAbs(dd_displacement(2.0, 1.0), 1e-12));
    CHECK_THAT(dd_displacement(2.0, 0.0), WithinAbs(1.0, 1e-6));
    CHECK_THROWS_AS(dd_displacement(2.0, 2.01), ConfigError);
    CHECK_THROWS_AS(dd_displacement(0.0, 0.5), ConfigError);
}

TEST_CASE("psi route gives one inside the ring phase and zero outside") {
    CHECK_THAT(psi_route_integral(2.0, 0.0), WithinAbs(1.0, 1e-6));
    CHECK_THAT(psi_route_integral(2.0, 1.0), WithinAbs(1.0, 1e-6));
    CHECK_THAT(psi_route_integral(2.0, 1.8), WithinAbs(1.0, 1e-6));
    CHECK_THAT(psi_route_integral(2.0, 3.0), WithinAbs(0.0, 1e-6));
}

TEST_CASE("sweep records per-point failures without aborting") {
    Methods m;
    const auto d = sweep(SweepAxis::bz, {0.0, 2.0, 4.0}, 2.0, m, 101);
    REQUIRE(d.points.size() == 3);
    CHECK(d.points[0].error.empty());
    CHECK_FALSE(d.points[1].error.empty());
    CHECK_FALSE(d.points[1].dd_metric.has_value());
    CHECK_THAT(*d.points[1].dd_connection, WithinAbs(-1.0 / 3.0, 1e-9));
    CHECK_THAT(*d.points[2].dd_connection, WithinAbs(*d.points[2].b_analytic, 1e-9));
    CHECK_THROWS_AS(sweep(SweepAxis::bz, {1.0, 0.5}, 2.0, m), ConfigError);

    std::ostringstream os;
    write_csv(os, d);
    std::string header;
    std::getline(std::istringstream(os.str()) >> std::ws, header);
    CHECK(header == "axis,value,G,B_numeric,B_analytic,DD_displacement,grid_alpha,grid_beta");
}

TEST_CASE("displacement sweep") {
    Methods m;
    const auto d = sweep(SweepAxis::delta_x, {0.5, 3.0}, 2.0, m, 101, 101);
    CHECK_THAT(*d.points[0].dd_displacement, WithinAbs(1.0, 0.01));
    CHECK_THAT(*d.points[1].dd_displacement, WithinAbs(0.0, 0.01));
}
