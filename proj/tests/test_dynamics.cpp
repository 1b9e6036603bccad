#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include <tensorpole/dynamics.hpp>

using namespace tensorpole;
using namespace tensorpole::dynamics;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const double h0 = two_pi * 2.0;

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

ModulationSpec spec_of(const ParamPoint& p, std::array<double, 3> amp, Pattern pat, double omega) {
    ModulationSpec s;
    s.base = p;
    s.amplitude = amp;
    s.pattern = pat;
    s.omega = omega;
    return s;
}

}  // namespace

TEST_CASE("modulated Hamiltonian at t = 0 and its first-order expansion") {
    const ParamPoint p(h0, 0.6, 0.3, 1.1);
    const auto lin = spec_of(p, {0.05, 0.02, 0.0}, Pattern::linear, 3.0);
    CHECK(max_abs(modulated_hamiltonian(lin, 0.0) - model::build_hamiltonian(p)) < 1e-12);
    const auto ell = spec_of(p, {0.05, 0.02, 0.0}, Pattern::elliptical, 3.0);
    CHECK(max_abs(modulated_hamiltonian(ell, 0.0) - model::build_hamiltonian(p.with_alpha(0.65))) < 1e-12);

    // the linearization error is second order in the amplitude
    auto err = [&](double m) {
        const auto s = spec_of(p, {m, m, m}, Pattern::linear, 3.0);
        double e = 0.0;
        for (int k = 0; k < 16; ++k) {
            const double t = k * 0.13;
            e = std::max(e, max_abs(modulated_hamiltonian(s, t) - linearized_hamiltonian(s, t)));
        }
        return e;
    };
    const double ratio = err(0.04) / err(0.02);
    CHECK(ratio > 3.5);
    CHECK(ratio < 4.5);
    CHECK(err(0.04) <= h0 * 0.04 * 0.04 * 3.0);
}

TEST_CASE("modulation specs are validated") {
    const ParamPoint p(h0, 0.6, 0.0, 0.0);
    CHECK_NOTHROW(validate(spec_of(p, {0.2, 0, 0}, Pattern::linear, 1.0)));
    CHECK_THROWS_AS(validate(spec_of(p, {0.21, 0, 0}, Pattern::linear, 1.0)), ConfigError);
    CHECK_THROWS_AS(validate(spec_of(p, {-0.01, 0, 0}, Pattern::linear, 1.0)), ConfigError);
    CHECK_THROWS_AS(validate(spec_of(p, {0, 0, 0}, Pattern::linear, 1.0)), ConfigError);
    CHECK_THROWS_AS(validate(spec_of(p, {0.1, 0, 0}, Pattern::elliptical, 1.0)), ConfigError);
    CHECK_THROWS_AS(validate(spec_of(p, {0.1, 0.1, 0.1}, Pattern::elliptical, 1.0)), ConfigError);
    CHECK_THROWS_AS(validate(spec_of(p, {0.1, 0, 0}, Pattern::linear, -1.0)), ConfigError);
    auto s = spec_of(p, {0.1, 0, 0}, Pattern::linear, 1.0);
    s.sign[0] = 2;
    CHECK_THROWS_AS(validate(s), ConfigError);
    CHECK(parse_pattern("elliptical") == Pattern::elliptical);
    CHECK(parse_transition("DQ") == Transition::dq);
    CHECK_THROWS_AS(parse_pattern("circular"), ConfigError);
}

TEST_CASE("static evolution from m_s = 0 at alpha = pi/4") {
    const ParamPoint p(h0, pi / 4, 0.4, 1.3);
    const Vector3c zero{{0.0, 1.0, 0.0}};
    const auto tr = evolve(model::build_hamiltonian(p), zero, 1.0, 0.04 / h0, 50, Basis::ms);
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const double s2 = std::pow(std::sin(h0 * tr.times[i]), 2);
        const auto& n = tr.populations[i];
        worst = std::max({worst, std::abs(n[0] - s2 / 2), std::abs(n[2] - s2 / 2), std::abs(n[1] - (1 - s2))});
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("zero Hamiltonian leaves the state unchanged") {
    const Vector3c psi = normalized(Vector3c{{cplx(0.3, 0.1), 0.5, cplx(0.0, -0.7)}});
    const auto tr = evolve(Matrix3c{}, psi, 5.0, 0.1, 10, Basis::ms);
    for (const auto& n : tr.populations)
        for (int k = 0; k < 3; ++k) CHECK_THAT(n[k], WithinAbs(std::norm(psi[k]), 1e-14));
}

TEST_CASE("step size above the phase bound is rejected") {
    const ParamPoint p(h0, 0.3, 0.0, 0.0);
    const Vector3c zero{{0.0, 1.0, 0.0}};
    CHECK_THROWS_AS(evolve(model::build_hamiltonian(p), zero, 1.0, 0.06 / h0, 1), ConfigError);
    const auto s = spec_of(p, {0.05, 0, 0}, Pattern::linear, h0);
    CHECK_THROWS_AS(evolve(s, zero, 1.0, 0.06 / h0, 1), ConfigError);
    CHECK_NOTHROW(evolve(s, zero, 0.1, auto_dt(s), 1));
    CHECK(auto_dt(s) * h0 <= 0.05);
    CHECK_THROWS_AS(evolve(s, Vector3c{{0.0, 2.0, 0.0}}, 1.0, 0.001, 1), ConfigError);
}

TEST_CASE("norm drifts by under 1e-12 per 1e4 propagator steps") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const ParamPoint p{h0, u(rng) * pi / 2, u(rng) * two_pi, u(rng) * two_pi, h0 * 4 * (u(rng) - 0.5)};
        const auto es = spectral::eigensystem(model::build_hamiltonian(p));
        Vector3c psi{{0.0, 1.0, 0.0}};
        for (int k = 0; k < 10000; ++k) psi = apply_exponential(es, 0.04 / spectral_norm(es), psi);
        worst = std::max(worst, std::abs(norm(psi) - 1.0));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("propagator matches the closed-form phase evolution") {
    const auto es = spectral::eigensystem(model::build_hamiltonian({h0, 0.7, 0.2, 0.9, 1.3}));
    const Vector3c psi0 = normalized(Vector3c{{0.3, cplx(0.4, 0.1), -0.5}});
    Vector3c psi = psi0;
    const double dt = 0.01 / spectral_norm(es);
    for (int k = 0; k < 500; ++k) psi = apply_exponential(es, dt, psi);
    Vector3c want;
    for (int k = 0; k < 3; ++k)
        want = want + std::polar(1.0, -es.energies[k] * 500 * dt) * dot(es.states[k], psi0) * es.states[k];
    CHECK(max_abs(psi - want) < 1e-12);
}

TEST_CASE("state preparation pulses") {
    const double w = two_pi * 10.0;
    const ParamPoint p(h0, pi / 4, 0.8, 2.1);
    const auto g = prepare_state(Target::ground, p, w);
    CHECK_THAT(g.pulses.t_minus, WithinRel(pi / (6 * w), 1e-12));
    CHECK_THAT(g.pulses.delta_minus, WithinAbs(p.phi() + pi / 2, 1e-15));
    CHECK_THAT(g.fidelity, WithinAbs(1.0, 1e-12));
    CHECK(g.pulse_recipe);

    const ParamPoint p0(h0, 0.0, 0.8, 0.0);
    const Vector3c expect = normalized(Vector3c{{-std::polar(1.0, -0.8), 1.0, 0.0}});
    CHECK_THAT(std::norm(dot(expect, prepare_state(Target::ground, p0, w).state)), WithinAbs(1.0, 1e-12));

    for (double a : {0.1, 0.5, pi / 4, 1.2, 1.5}) {
        const ParamPoint q(h0, a, 1.0, -0.5);
        const auto mid = prepare_state(Target::middle, q, w);
        CHECK_THAT(mid.pulses.t_minus, WithinRel(std::asin(std::cos(a)) / w, 1e-12));
        CHECK_THAT(mid.pulses.t_plus, WithinRel(pi / (2 * w), 1e-12));
        CHECK_THAT(mid.fidelity, WithinAbs(1.0, 1e-12));
        CHECK_THAT(prepare_state(Target::ground, q, w).fidelity, WithinAbs(1.0, 1e-12));
    }
    CHECK_THROWS_AS(prepare_state(Target::ground, {h0, 0.4, 0, 0, 1.0}, w), ConfigError);
    CHECK_THROWS_AS(prepare_state(Target::ground, p, 0.0), ConfigError);
    const auto ex = prepare(Target::ground, {h0, 0.4, 0, 0, 1.0}, w);
    CHECK_FALSE(ex.pulse_recipe);
}

TEST_CASE("direct matrix elements at the chiral point") {
    const ParamPoint p(h0, 0.9, 0.4, 0.2);
    const DrivePattern a{Axis::alpha, std::nullopt, false, Pattern::linear};
    CHECK_THAT(gamma_direct(p, a, Transition::sq).value, WithinAbs(h0 / std::sqrt(2.0), 1e-12));
    CHECK_THAT(gamma_direct(p, a, Transition::dq).value, WithinAbs(0.0, 1e-12));
    const auto es = gapped_eigensystem(p, "test");
    const double d1 = es.energies[1] - es.energies[0], d2 = es.energies[2] - es.energies[0];
    for (Axis ax : model::all_axes) {
        const DrivePattern d{ax, std::nullopt, false, Pattern::linear};
        const double s = std::pow(gamma_direct(p, d, Transition::sq).value / d1, 2) +
                         std::pow(gamma_direct(p, d, Transition::dq).value / d2, 2);
        CHECK_THAT(s, WithinAbs(geometry::qgt_analytic(0.9).g[static_cast<int>(ax)][static_cast<int>(ax)], 1e-12));
    }
}

TEST_CASE("direct matrix elements do not depend on beta") {
    for (const auto& d : required_patterns())
        for (Transition t : {Transition::sq, Transition::dq}) {
            const double ref = gamma_direct({h0, pi / 8, 0.0, 0.3}, d, t).value;
            CHECK_THAT(gamma_direct({h0, pi / 8, 1.9, 0.3}, d, t).value, WithinAbs(ref, 1e-10));
        }
}

TEST_CASE("RWA coupling equals half the amplitude times the direct element for every pattern") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const ParamPoint p(h0, 0.1 + 1.3 * u(rng), two_pi * u(rng), two_pi * u(rng), h0 * (u(rng) - 0.5));
        const auto es = gapped_eigensystem(p, "test");
        for (const auto& d : required_patterns())
            for (Transition t : {Transition::sq, Transition::dq}) {
                const double m = 0.03;
                const auto s = make_spec(p, d, m, 1.0);
                const double c = rwa_coupling(s, es.states[0], es.states[target_band(t)]);
                CHECK_THAT(2.0 * c / m, WithinAbs(gamma_direct(p, d, t).value, 1e-9 * h0));
            }
    }
}

TEST_CASE("canonical ordering swaps axes and flips the elliptical orientation") {
    const auto c = canonical({Axis::phi, Axis::alpha, false, Pattern::elliptical});
    CHECK(c.mu == Axis::alpha);
    CHECK(*c.nu == Axis::phi);
    CHECK(c.bar);
    const auto l = canonical({Axis::phi, Axis::beta, true, Pattern::linear});
    CHECK(l.mu == Axis::beta);
    CHECK(l.bar);
    const ParamPoint p(h0, 0.7, 0.1, 0.2);
    CHECK_THAT(gamma_direct(p, {Axis::phi, Axis::alpha, false, Pattern::elliptical}, Transition::dq).value,
               WithinAbs(gamma_direct(p, {Axis::alpha, Axis::phi, true, Pattern::elliptical}, Transition::dq).value, 1e-12));
}

TEST_CASE("reconstruction from direct matrix elements recovers the tensor") {
    for (double bz : {0.0, 0.6 * h0}) {
        const ParamPoint p(h0, 5 * pi / 16, 0.3, 0.7, bz);
        const auto q = reconstruct_qgt(gamma_set_direct(p), gapped_eigensystem(p, "test").energies);
        const auto ref = geometry::qgt_perturbative(p);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                CHECK_THAT(q.g[i][j], WithinAbs(ref.g[i][j], 1e-10));
                CHECK_THAT(q.f[i][j], WithinAbs(ref.f[i][j], 1e-10));
            }
    }
    GammaSet partial = gamma_set_direct({h0, 0.5, 0, 0}, false);
    CHECK_NOTHROW(reconstruct_qgt(partial, {-h0, 0, h0}, false));
    CHECK_THROWS_AS(reconstruct_qgt(partial, {-h0, 0, h0}, true), ConfigError);
    partial.single[1][0].reset();
    CHECK_THROWS_WITH(reconstruct_qgt(partial, {-h0, 0, h0}, false), Catch::Matchers::ContainsSubstring("beta/SQ"));
}

TEST_CASE("simulated matrix elements match the direct ones") {
    const ParamPoint p(h0, pi / 4, 0.0, 0.0);
    const DrivePattern bp{Axis::beta, Axis::phi, false, Pattern::elliptical};
    const auto x = gamma_simulated(p, bp, Transition::dq);
    CHECK(x.protocol == Protocol::two_level);
    CHECK(rel_err(x.gamma.value, gamma_direct(p, bp, Transition::dq).value) < 0.02);

    const DrivePattern a{Axis::alpha, std::nullopt, false, Pattern::linear};
    const auto y = gamma_simulated(p, a, Transition::sq);
    CHECK(y.protocol == Protocol::ladder_linear);
    CHECK(rel_err(y.gamma.value, h0 / std::sqrt(2.0)) < 0.02);

    const DrivePattern ab{Axis::alpha, Axis::beta, false, Pattern::elliptical};
    const auto z = gamma_simulated(p, ab, Transition::sq);
    CHECK(z.protocol == Protocol::ladder_elliptical);
    CHECK(rel_err(z.gamma.value, gamma_direct(p, ab, Transition::sq).value) < 0.02);

    // with a field the single-quantum gaps split except on the alpha = pi/4 line
    const ParamPoint q(h0, 0.3, 0, 0, 0.5 * h0);
    const auto w = gamma_simulated(q, a, Transition::sq);
    CHECK(w.protocol == Protocol::two_level);
    CHECK_FALSE(w.pulse_prep);
    CHECK(rel_err(w.gamma.value, gamma_direct(q, a, Transition::sq).value) < 0.02);
    CHECK(gamma_simulated({h0, pi / 4, 0, 0, 0.5 * h0}, a, Transition::sq).protocol == Protocol::ladder_linear);
}

TEST_CASE("rotating-wave error grows with the modulation amplitude") {
    const ParamPoint p(h0, pi / 4, 0.0, 0.0);
    const DrivePattern bp{Axis::beta, Axis::phi, false, Pattern::elliptical};
    const double want = gamma_direct(p, bp, Transition::dq).value;
    auto err = [&](double m) {
        ExperimentOptions o;
        o.m = m;
        return rel_err(gamma_simulated(p, bp, Transition::dq, o).gamma.value, want);
    };
    const double small = err(0.01), mid = err(1.0 / 30), large = err(0.1);
    CHECK(mid < 0.02);
    CHECK(large < 0.08);
    CHECK(large > small);
}

TEST_CASE("resonance scan peaks at the double-quantum gap") {
    const ParamPoint p(h0, pi / 4, 0.0, 0.0);
    const auto s = spec_of(p, {0.0, 1.0 / 30, 1.0 / 30}, Pattern::linear, 0.0);
    const auto omegas = linspace(two_pi * 3.8, two_pi * 4.2, 41);
    const auto r = resonance_scan(s, omegas, 7.5);
    const double step = omegas[1] - omegas[0];
    CHECK(std::abs(r.peak_omega - 2 * h0) <= step);
    CHECK(std::abs(r.refined_omega - 2 * h0) <= step);
    CHECK(r.transfer[r.peak_index] > 0.2);

    const auto tiny = spec_of(p, {0.0, 1e-4, 1e-4}, Pattern::linear, 0.0);
    const auto flat = resonance_scan(tiny, linspace(two_pi * 3.8, two_pi * 4.2, 9), 7.5, two_pi * 10.0, false);
    for (double v : flat.transfer) CHECK(v < 1e-3);
    CHECK_THROWS_AS(resonance_scan(s, {}, 7.5), ConfigError);
}

TEST_CASE("field splits the single-quantum resonance") {
    const ParamPoint p(h0, 0.3, 0.0, 0.0, 0.5 * h0);
    const auto es = gapped_eigensystem(p, "test");
    const double lo = es.energies[1] - es.energies[0], hi = es.energies[2] - es.energies[1];
    CHECK(std::abs(lo - hi) > 0.1 * h0);
    const auto s = spec_of(p, {1.0 / 30, 0, 0}, Pattern::linear, 0.0);
    const auto omegas = linspace(lo - 0.1 * h0, lo + 0.1 * h0, 41);
    const auto r = resonance_scan(s, omegas, 7.5);
    CHECK(std::abs(r.peak_omega - lo) <= omegas[1] - omegas[0]);
}

TEST_CASE("degenerate single-quantum ladder follows the three-level reference") {
    const auto eq = degenerate_sq_reference(1.0, 1.0, pi / (4 * std::sqrt(2.0)));
    CHECK_THAT(eq[0], WithinAbs(0.25, 1e-15));
    CHECK_THAT(eq[1], WithinAbs(0.5, 1e-15));
    CHECK_THAT(eq[2], WithinAbs(0.25, 1e-15));
    const auto lop = degenerate_sq_reference(3.0, 1.0, 0.3);
    CHECK_THAT(lop[0] / lop[2], WithinAbs(9.0, 1e-12));
    CHECK_THAT(lop[0] + lop[1] + lop[2], WithinAbs(1.0, 1e-15));
    CHECK_THROWS_AS(degenerate_sq_reference(0.0, 0.0, 1.0), ConfigError);

    const ParamPoint p(h0, pi / 3, 0.0, 0.0);
    const DrivePattern ab{Axis::alpha, Axis::beta, false, Pattern::elliptical};
    auto s = make_spec(p, ab, 1.0 / 30, 0.0);
    s.omega = drive_frequency(s, Transition::sq, true);
    const auto [b1, b2] = degenerate_sq_couplings(s);
    const double span = 5 * pi / std::hypot(b1, b2);
    const auto psi0 = prepare_state(Target::middle, p, two_pi * 10).state;
    const auto tr = evolve(s, psi0, span, auto_dt(s), 200);
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const auto ref = degenerate_sq_reference(b1, b2, tr.times[i]);
        for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(tr.populations[i][k] - ref[k]));
    }
    CHECK(worst < 2e-2);
}

TEST_CASE("three-readout inversion") {
    ReadoutModel m;
    const Populations n{0.2, 0.5, 0.3};
    const auto back = three_readout_solve(readout_forward(m, n), m);
    for (int k = 0; k < 3; ++k) CHECK_THAT(back[k], WithinAbs(n[k], 1e-12));
    CHECK(std::isfinite(condition_number(readout_matrix(m))));

    ReadoutModel flat{1.0, 1.0, 1.0};
    CHECK_THROWS_AS(readout_inverse(flat), NumericalError);
    ReadoutModel near{1.0, 1.0 + 1e-12, 1.0};
    CHECK_THROWS_AS(readout_inverse(near), NumericalError);
}

TEST_CASE("noisy readout is unbiased with the propagated spread") {
    ReadoutModel m;
    m.sigma = 0.05;
    const Populations n{0.1, 0.6, 0.3};
    const auto inv = readout_inverse(m);
    std::mt19937_64 rng(11);
    const int trials = 10000;
    std::array<double, 3> mean{}, sq{};
    for (int i = 0; i < trials; ++i) {
        const auto r = three_readout_solve(readout_forward(m, n, rng), m);
        for (int k = 0; k < 3; ++k) {
            mean[k] += r[k] / trials;
            sq[k] += r[k] * r[k] / trials;
        }
    }
    for (int k = 0; k < 3; ++k) {
        const double expect_sd = m.sigma * std::sqrt(inv[k][0] * inv[k][0] + inv[k][1] * inv[k][1] + inv[k][2] * inv[k][2]);
        const double sd = std::sqrt(sq[k] - mean[k] * mean[k]);
        CHECK(std::abs(mean[k] - n[k]) < 5 * expect_sd / std::sqrt(trials));
        CHECK_THAT(sd, WithinRel(expect_sd, 0.05));
    }
}

TEST_CASE("sinusoid fits") {
    std::vector<double> t(400), y(400);
    for (int i = 0; i < 400; ++i) {
        t[i] = 20.0 * i / 399;
        y[i] = 0.3 + 0.4 * std::cos(1.7 * t[i] + 0.5);
    }
    const auto f = fit_sinusoid(t, y);
    CHECK_THAT(f.omega, WithinRel(1.7, 1e-8));
    CHECK_THAT(f.amplitude, WithinRel(0.4, 1e-8));
    CHECK_THAT(f.offset, WithinAbs(0.3, 1e-8));
    CHECK_THAT(f.phase, WithinAbs(0.5, 1e-8));
    CHECK(f.residual_rms < 1e-8);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.02);
    for (int i = 0; i < 400; ++i) y[i] = std::pow(std::sin(0.9 * t[i] / 2), 2) + noise(rng);
    CHECK_THAT(fit_sinusoid(t, y).omega, WithinRel(0.9, 0.01));
    const auto c = fit_constrained(t, y, 1.0, 4.0);
    CHECK(c.constrained);
    CHECK_THAT(c.omega, WithinRel(0.9, 0.01));
}

TEST_CASE("simulated tensor reconstruction off the symmetric point") {
    const ParamPoint p(h0, 5 * pi / 16, 0.0, 0.0);
    const auto e = emulate_qgt(p);
    const auto ref = geometry::qgt_analytic(5 * pi / 16);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double tol = 0.02 * std::sqrt(ref.g[i][i] * ref.g[j][j]) + 1e-4;
            CHECK_THAT(e.qgt.g[i][j], WithinAbs(ref.g[i][j], tol));
            CHECK_THAT(e.qgt.f[i][j], WithinAbs(ref.f[i][j], tol));
        }
    CHECK(e.experiments.size() == 30);
}

TEST_CASE("trace csv") {
    const auto tr = evolve(Matrix3c{}, Vector3c{{0.0, 1.0, 0.0}}, 1.0, 0.5, 2, Basis::ms);
    std::ostringstream os;
    write_trace_csv(os, tr);
    CHECK(os.str().rfind("t,n_plus,n_zero,n_minus,basis\n0,", 0) == 0);
    CHECK(os.str().find(",ms\n") != std::string::npos);
}
