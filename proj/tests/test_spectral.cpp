#include <catch_amalgamated.hpp>

#include <random>

#include <tensorpole/gellmann.hpp>
#include <tensorpole/model.hpp>
#include <tensorpole/nodal.hpp>
#include <tensorpole/spectral.hpp>

using namespace tensorpole;
using namespace tensorpole::spectral;
using Catch::Matchers::WithinAbs;

namespace {

Matrix3c random_hermitian(std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix3c h;
    for (int i = 0; i < 3; ++i) {
        h(i, i) = n(rng);
        for (int j = i + 1; j < 3; ++j) {
            h(i, j) = cplx(n(rng), n(rng));
            h(j, i) = std::conj(h(i, j));
        }
    }
    return h;
}

double worst_residual(const Matrix3c& h, const EigenSystem& es) {
    double r = 0.0;
    for (int k = 0; k < 3; ++k) r = std::max(r, norm(h * es.states[k] - cplx(es.energies[k]) * es.states[k]));
    return r;
}

double orthonormality_defect(const EigenSystem& es) {
    double d = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) d = std::max(d, std::abs(dot(es.states[i], es.states[j]) - (i == j ? 1.0 : 0.0)));
    return d;
}

}  // namespace

TEST_CASE("closed-form eigensolver agrees with Jacobi on random hermitian matrices") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 3000; ++i) {
        const double scale = std::pow(10.0, (i % 7) - 3);
        const auto h = random_hermitian(rng, scale);
        const auto es = eigensystem(h);
        std::array<double, 3> w;
        std::array<Vector3c, 3> v;
        detail::jacobi(h, w, v);
        std::sort(w.begin(), w.end());
        const double s = max_abs(h);
        for (int k = 0; k < 3; ++k) CHECK(std::abs(es.energies[k] - w[k]) <= 1e-12 * s);
        CHECK(es.energies[0] <= es.energies[1]);
        CHECK(es.energies[1] <= es.energies[2]);
        CHECK(worst_residual(h, es) <= 1e-12 * s);
        CHECK(orthonormality_defect(es) <= 1e-12);
    }
}

TEST_CASE("zero-field spectrum is (-h0, 0, h0) everywhere on the sphere") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const double h0 = 0.1 + 5 * u(rng);
        const auto e = eigenvalues(model::build_hamiltonian({h0, u(rng) * pi / 2, u(rng) * two_pi, u(rng) * two_pi}));
        CHECK_THAT(e[0], WithinAbs(-h0, 1e-13 * h0));
        CHECK_THAT(e[1], WithinAbs(0.0, 1e-13 * h0));
        CHECK_THAT(e[2], WithinAbs(h0, 1e-13 * h0));
    }
}

TEST_CASE("planar closed form matches the eigensolver with a field") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        const double qx = u(rng), qy = u(rng), bz = u(rng);
        const auto e = eigenvalues(model::hamiltonian_from_cartesian({qx, qy, 0.0, 0.0}, bz));
        const auto a = analytic_eigenvalues_planar(qx, qy, bz);
        for (int k = 0; k < 3; ++k) CHECK_THAT(e[k], WithinAbs(a[k], 1e-13));
    }
}

TEST_CASE("v2-real gauge makes the middle component real and positive") {
    const auto es = eigensystem(model::build_hamiltonian({2.0, 0.6, 0.9, -0.4, 0.5}));
    for (int k = 0; k < 3; ++k) {
        CHECK(es.gauge[k] == GaugeLabel::v2_real);
        CHECK(es.states[k][1].imag() == 0.0);
        CHECK(es.states[k][1].real() > 0.0);
    }
    // at zero field u0 has no m_s = 0 weight
    const auto es0 = eigensystem(model::build_hamiltonian({2.0, 0.6, 0.9, -0.4}));
    CHECK(es0.gauge[0] == GaugeLabel::v2_real);
    CHECK(es0.gauge[1] == GaugeLabel::largest_component);
    CHECK_THAT(std::abs(es0.states[1][1]), WithinAbs(0.0, 1e-14));
    CHECK_THAT(es0.states[0][1].real(), WithinAbs(1.0 / std::sqrt(2.0), 1e-14));
}

TEST_CASE("largest-component gauge is used when the middle component vanishes") {
    // bz only: eigenvectors are basis vectors, m_s = +1 has no middle component
    const auto es = eigensystem(model::bz_term(1.0));
    CHECK(es.gauge[0] == GaugeLabel::largest_component);
    CHECK(es.gauge[1] == GaugeLabel::v2_real);
    CHECK(es.gauge[2] == GaugeLabel::largest_component);
    const auto es2 = eigensystem(model::build_hamiltonian({1.0, 0.3, 0.2, 0.1}), Gauge::largest_component);
    for (int k = 0; k < 3; ++k) CHECK(es2.gauge[k] == GaugeLabel::largest_component);
}

TEST_CASE("degenerate spectra return an orthonormal basis of the subspace") {
    const auto z = eigensystem(Matrix3c{});
    CHECK(z.degenerate);
    CHECK(orthonormality_defect(z) == 0.0);
    Matrix3c h = Matrix3c::diagonal(1.0, 1.0, 2.0);
    h(0, 1) = 0.0;
    const auto es = eigensystem(h);
    CHECK(es.degenerate);
    CHECK(es.gauge[0] == GaugeLabel::degenerate);
    CHECK(worst_residual(h, es) < 1e-14);
    CHECK(orthonormality_defect(es) < 1e-14);
    // a rotated doubly degenerate matrix
    std::mt19937_64 rng(9);
    const auto es_r = eigensystem(random_hermitian(rng, 1.0));
    Matrix3c u;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) u(i, j) = es_r.states[j][i];
    const Matrix3c d = u * Matrix3c::diagonal(-1.0, 3.0, 3.0) * adjoint(u);
    const auto es_d = eigensystem(d);
    CHECK(es_d.degenerate);
    CHECK(worst_residual(d, es_d) < 1e-13);
    CHECK(orthonormality_defect(es_d) < 1e-13);
    CHECK(min_adjacent_gap(es_d.energies) == 0.0);
}

TEST_CASE("non-hermitian input is rejected") {
    Matrix3c h;
    h(0, 1) = 1.0;
    CHECK_THROWS_AS(eigensystem(h), NumericalError);
}

TEST_CASE("band gaps") {
    const auto h = model::build_hamiltonian({2.0, 0.3, 0.0, 0.0, 1.0});
    const auto e = eigenvalues(h);
    CHECK_THAT(band_gap(h, BandPair::lower), WithinAbs(e[1] - e[0], 1e-15));
    CHECK_THAT(band_gap(h, BandPair::upper), WithinAbs(e[2] - e[1], 1e-15));
}

TEST_CASE("nodal ring radius equals the field within one cell") {
    for (double bz : {0.5, 1.0, 2.0}) {
        GridSpec g;
        g.extent = 2.0 * bz;
        g.points = 256;
        const auto r = nodal_scan(bz, Plane::qx_qy, g);
        CHECK(std::abs(r.ring_radius_estimate - bz) <= r.cell);
        CHECK(r.nodal_count > 8);
        CHECK(r.min_gap < r.threshold);
    }
}

TEST_CASE("lambda5 gaps the qx-qz plane, lambda4 leaves isolated nodal points") {
    GridSpec g;
    g.extent = 2.0;
    g.points = 256;
    const auto r5 = nodal_scan(0.0, Plane::qx_qz, g, model::perturbation_term(model::Perturbation::lambda5, 0.3));
    CHECK(r5.min_gap > 0.1);
    CHECK(r5.local_minima.empty());
    const auto r4 = nodal_scan(0.0, Plane::qx_qz, g, model::perturbation_term(model::Perturbation::lambda4, 0.3));
    CHECK(r4.min_gap <= r4.grid_zero_bound);
    REQUIRE_FALSE(r4.local_minima.empty());
    CHECK(r4.local_minima.size() <= 8);
    // every zero lies away from the origin, which lambda4 gaps
    for (const auto& m : r4.local_minima) CHECK(std::hypot(m.u, m.v) > 0.1);
    const double origin_gap = min_adjacent_gap(eigenvalues(model::perturbation_term(model::Perturbation::lambda4, 0.3)));
    CHECK(origin_gap > 0.2);
}

TEST_CASE("nodal scan validates its grid") {
    GridSpec g;
    g.points = 1;
    CHECK_THROWS_AS(nodal_scan(1.0, Plane::qx_qy, g), ConfigError);
    g.points = 16;
    g.extent = 0.0;
    CHECK_THROWS_AS(nodal_scan(1.0, Plane::qx_qy, g), ConfigError);
    CHECK(parse_plane("qz-qw") == Plane::qz_qw);
    CHECK_THROWS_AS(parse_plane("qx-qw"), ConfigError);
}
