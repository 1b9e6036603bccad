#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "spectral.hpp"

namespace tensorpole::geometry {

using model::Axis;
using model::ParamPoint;
using Mat3r = std::array<std::array<double, 3>, 3>;

// chi = g + i f / 2 over (alpha, beta, phi).
struct QGTensor {
    Mat3r g{};
    Mat3r f{};
    int band = 0;

    cplx chi(int i, int j) const { return {g[i][j], 0.5 * f[i][j]}; }
    // curvature of the Berry connection A = i<u|du>; equals -f
    double berry_curvature(int i, int j) const { return -f[i][j]; }
};

inline double det3(const Mat3r& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

inline double energy_scale(const ParamPoint& p, const Hamiltonian3& h) {
    return p.h0() > 0.0 ? p.h0() : max_abs(h);
}

inline void require_gapped(const spectral::EigenSystem& es, double scale, const std::string& where) {
    const double lo = es.energies[1] - es.energies[0], hi = es.energies[2] - es.energies[1];
    if (lo <= 1e-9 * scale || hi <= 1e-9 * scale)
        throw DegenerateSpectrumError(where + ": degenerate spectrum, " +
                                      (lo <= 1e-9 * scale ? "lower gap " + std::to_string(lo)
                                                          : "upper gap " + std::to_string(hi)) +
                                      " closes");
}

// Sum-over-states QGT of band n for a given eigensystem and parameter derivatives.
inline QGTensor qgt_from_states(const spectral::EigenSystem& es, const std::array<Hamiltonian3, 3>& dh, int band) {
    std::array<std::array<cplx, 3>, 3> me{};  // me[mu][m] = <n|d_mu H|m>
    for (int mu = 0; mu < 3; ++mu)
        for (int m = 0; m < 3; ++m) me[mu][m] = matrix_element(es.states[band], dh[mu], es.states[m]);
    QGTensor q;
    q.band = band;
    for (int mu = 0; mu < 3; ++mu)
        for (int nu = 0; nu < 3; ++nu) {
            cplx chi = 0.0;
            for (int m = 0; m < 3; ++m) {
                if (m == band) continue;
                const double de = es.energies[band] - es.energies[m];
                chi += me[mu][m] * std::conj(me[nu][m]) / (de * de);
            }
            q.g[mu][nu] = std::real(chi);
            q.f[mu][nu] = 2.0 * std::imag(chi);
        }
    for (int mu = 0; mu < 3; ++mu) {
        q.f[mu][mu] = 0.0;
        for (int nu = mu + 1; nu < 3; ++nu) {
            const double gs = 0.5 * (q.g[mu][nu] + q.g[nu][mu]);
            const double fa = 0.5 * (q.f[mu][nu] - q.f[nu][mu]);
            q.g[mu][nu] = q.g[nu][mu] = gs;
            q.f[mu][nu] = fa;
            q.f[nu][mu] = -fa;
        }
    }
    return q;
}

inline QGTensor qgt_perturbative(const ParamPoint& p, int band = 0) {
    const Hamiltonian3 h = model::build_hamiltonian(p);
    const auto es = spectral::eigensystem(h);
    require_gapped(es, energy_scale(p, h), "qgt_perturbative");
    return qgt_from_states(es, {model::param_derivative(p, Axis::alpha), model::param_derivative(p, Axis::beta),
                                model::param_derivative(p, Axis::phi)},
                           band);
}

inline QGTensor qgt_analytic(double alpha) {
    const double c = std::cos(alpha), s = std::sin(alpha), s2 = std::sin(2.0 * alpha);
    QGTensor q;
    q.g[0][0] = 0.5;
    q.g[1][1] = c * c * (2.0 - c * c) / 4.0;
    q.g[2][2] = s * s * (2.0 - s * s) / 4.0;
    q.g[1][2] = q.g[2][1] = -s2 * s2 / 16.0;
    q.f[0][1] = s2 / 2.0;
    q.f[1][0] = -s2 / 2.0;
    q.f[0][2] = -s2 / 2.0;
    q.f[2][0] = s2 / 2.0;
    return q;
}

namespace detail {

inline Vector3c band_state_raw(const ParamPoint& p, double a, double b, double f, int band, double scale,
                               const char* where) {
    const auto es = spectral::eigensystem(model::hamiltonian_at(p.h0(), a, b, f, p.bz(), p.delta_x()));
    require_gapped(es, scale, where);
    return es.states[band];
}

}  // namespace detail

// Overlap-based metric and plaquette-based curvature; the independent oracle for qgt_perturbative.
inline QGTensor qgt_fd(const ParamPoint& p, double step, int band = 0) {
    if (!(step > 0.0 && step <= 0.1)) throw ConfigError("qgt_fd: step must lie in (0, 0.1]");
    const Hamiltonian3 h = model::build_hamiltonian(p);
    const double scale = energy_scale(p, h);
    const std::array<double, 3> x0{p.alpha(), p.beta(), p.phi()};
    auto state = [&](std::array<double, 3> x) {
        return detail::band_state_raw(p, x[0], x[1], x[2], band, scale, "qgt_fd");
    };
    const Vector3c u0 = state(x0);
    auto shifted = [&](const std::array<double, 3>& d, double t) {
        std::array<double, 3> x = x0;
        for (int k = 0; k < 3; ++k) x[k] += t * d[k];
        return x;
    };
    // symmetrised D(t) = 1 - |<u(x)|u(x + t d)>|^2, least-squares fit of D = g t^2 + c t^4 at t = k step
    auto dist = [&](const std::array<double, 3>& d) {
        double s22 = 0, s24 = 0, s44 = 0, b2 = 0, b4 = 0;
        for (int k = 1; k <= 4; ++k) {
            const double t = k * step;
            const double a = 1.0 - std::norm(dot(u0, state(shifted(d, t))));
            const double b = 1.0 - std::norm(dot(u0, state(shifted(d, -t))));
            const double y = 0.5 * (a + b), x2 = t * t, x4 = x2 * x2;
            s22 += x2 * x2;
            s24 += x2 * x4;
            s44 += x4 * x4;
            b2 += x2 * y;
            b4 += x4 * y;
        }
        return (b2 * s44 - b4 * s24) / (s22 * s44 - s24 * s24);
    };
    QGTensor q;
    q.band = band;
    const double h2 = step * step;
    for (int mu = 0; mu < 3; ++mu) {
        std::array<double, 3> e{};
        e[mu] = 1.0;
        q.g[mu][mu] = dist(e);
    }
    for (int mu = 0; mu < 3; ++mu)
        for (int nu = mu + 1; nu < 3; ++nu) {
            std::array<double, 3> dp{}, dm{};
            dp[mu] = 1.0;
            dp[nu] = 1.0;
            dm[mu] = 1.0;
            dm[nu] = -1.0;
            q.g[mu][nu] = q.g[nu][mu] = (dist(dp) - dist(dm)) / 4.0;
            // plaquette centred on x0
            std::array<double, 3> c[4];
            const double hs = 0.5 * step;
            const int sgn[4][2] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
            Vector3c u[4];
            for (int k = 0; k < 4; ++k) {
                c[k] = x0;
                c[k][mu] += sgn[k][0] * hs;
                c[k][nu] += sgn[k][1] * hs;
                u[k] = state(c[k]);
            }
            const cplx w = dot(u[0], u[1]) * dot(u[1], u[2]) * dot(u[2], u[3]) * dot(u[3], u[0]);
            q.f[mu][nu] = std::arg(w) / h2;
            q.f[nu][mu] = -q.f[mu][nu];
        }
    return q;
}

enum class Route { metric, connection, psi, analytic, displaced_analytic };

inline std::string route_name(Route r) {
    switch (r) {
        case Route::metric: return "metric";
        case Route::connection: return "connection";
        case Route::psi: return "psi";
        case Route::analytic: return "analytic";
        case Route::displaced_analytic: return "displaced-analytic";
    }
    return "?";
}

struct ThreeFormSample {
    double value = 0.0;
    Route route = Route::metric;
    std::string gauge;
};

inline ThreeFormSample three_form_from_metric(const QGTensor& q) {
    const double d = det3(q.g);
    if (d < -1e-12) throw NumericalError("three_form_from_metric: negative metric determinant " + std::to_string(d));
    return {4.0 * std::sqrt(std::max(d, 0.0)), Route::metric, "gauge-invariant"};
}

inline ThreeFormSample three_form_analytic(double alpha) {
    return {std::sin(alpha) * std::cos(alpha), Route::analytic, "gauge-invariant"};
}

// Phi = -(i/2) log(u1 u2 u3), principal branch.
inline cplx phi_dressing(const Vector3c& u) {
    for (int k = 0; k < 3; ++k)
        if (std::abs(u[k]) <= 1e-9)
            throw NumericalError("phi_dressing: component " + std::to_string(k + 1) + " vanishes (singular gauge)");
    return -0.5 * I * std::log(u[0] * u[1] * u[2]);
}

// Continuity along a sweep: a 2 pi jump of the log's phase moves Re(Phi) by pi.
inline void unwrap_phi(std::vector<cplx>& phis) {
    for (std::size_t k = 1; k < phis.size(); ++k) {
        double re = phis[k].real();
        const double prev = phis[k - 1].real();
        re += pi * std::round((prev - re) / pi);
        phis[k] = {re, phis[k].imag()};
    }
}

struct ConnectionSample {
    cplx phi_dressing;
    std::array<std::array<cplx, 3>, 3> b{};
    std::string gauge;
};

inline ConnectionSample tensor_connection(const ParamPoint& p) {
    const Hamiltonian3 h = model::build_hamiltonian(p);
    const auto es = spectral::eigensystem(h);
    require_gapped(es, energy_scale(p, h), "tensor_connection");
    const QGTensor q = qgt_from_states(es, {model::param_derivative(p, Axis::alpha),
                                            model::param_derivative(p, Axis::beta),
                                            model::param_derivative(p, Axis::phi)},
                                       0);
    ConnectionSample s;
    s.phi_dressing = phi_dressing(es.ground());
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s.b[i][j] = s.phi_dressing * q.berry_curvature(i, j);
    s.gauge = spectral::gauge_label_name(es.gauge[0]);
    return s;
}

namespace detail {

// Ground state in the v2-real gauge at raw alpha; requires delta_x = 0 so the
// reduced components v1, v3 are real.
inline Vector3c v2_real_ground(const ParamPoint& p, double alpha, const char* where) {
    const Hamiltonian3 h = model::hamiltonian_at(p.h0(), alpha, p.beta(), p.phi(), p.bz());
    const auto es = spectral::eigensystem(h, spectral::Gauge::v2_real);
    require_gapped(es, p.h0() > 0 ? p.h0() : max_abs(h), where);
    if (es.gauge[0] != spectral::GaugeLabel::v2_real)
        throw NumericalError(std::string(where) + ": v2-real gauge inapplicable (|u2| <= 1e-9)");
    return es.ground();
}

// Richardson-extrapolated central difference of w at x.
template <class W>
double richardson_derivative(W&& w, double x, double h) {
    const double d1 = (w(x + h) - w(x - h)) / (2.0 * h);
    const double d2 = (w(x + 0.5 * h) - w(x - 0.5 * h)) / h;
    return (4.0 * d2 - d1) / 3.0;
}

}  // namespace detail

struct ConnectionThreeForm {
    ThreeFormSample sample;  // from perturbative curvature
    double finite_difference = 0.0;  // -(1/2) d/dalpha (v1^2 - v3^2)
};

inline ConnectionThreeForm three_form_from_connection(const ParamPoint& p, double step = 1e-5) {
    if (p.delta_x() != 0.0) throw ConfigError("three_form_from_connection: requires delta_x = 0");
    const Vector3c u = detail::v2_real_ground(p, p.alpha(), "three_form_from_connection");
    (void)u;
    const QGTensor q = qgt_perturbative(p);
    ConnectionThreeForm r;
    r.sample = {-0.5 * (q.berry_curvature(0, 1) + q.berry_curvature(2, 0)), Route::connection, "v2-real"};
    auto w = [&](double a) {
        const Vector3c v = detail::v2_real_ground(p, a, "three_form_from_connection");
        return std::norm(v[0]) - std::norm(v[2]);
    };
    r.finite_difference = -0.5 * detail::richardson_derivative(w, p.alpha(), step);
    if (std::abs(r.finite_difference - r.sample.value) > 1e-6)
        throw NumericalError("three_form_from_connection: curvature and eigenvector routes disagree (" +
                             std::to_string(r.sample.value) + " vs " + std::to_string(r.finite_difference) + ")");
    return r;
}

struct ReducedGround {
    double v1, v2, v3;     // real reduced amplitudes
    double dv1sq, dv3sq;   // d/dalpha of v1^2, v3^2
};

inline ReducedGround reduced_ground(const ParamPoint& p, double alpha, double step = 1e-5) {
    auto comps = [&](double a) {
        const Vector3c u = detail::v2_real_ground(p, a, "reduced_ground");
        return std::array<double, 3>{std::real(u[0] * std::polar(1.0, p.beta())), std::real(u[1]),
                                     std::real(u[2] * std::polar(1.0, p.phi()))};
    };
    const auto v = comps(alpha);
    ReducedGround r{v[0], v[1], v[2], 0.0, 0.0};
    r.dv1sq = detail::richardson_derivative([&](double a) { return std::pow(comps(a)[0], 2); }, alpha, step);
    r.dv3sq = detail::richardson_derivative([&](double a) { return std::pow(comps(a)[2], 2); }, alpha, step);
    return r;
}

// 3-form from the psi-field construction, normalised to match the QGT value at bz = 0.
// Complex in general; real when beta = phi.
inline cplx three_form_psi(const ParamPoint& p, double step = 1e-5) {
    if (p.delta_x() != 0.0) throw ConfigError("three_form_psi: requires delta_x = 0");
    const ReducedGround r = reduced_ground(p, p.alpha(), step);
    const cplx x = std::polar(1.0, -p.beta()) * r.v1;
    const cplx y = std::polar(1.0, -p.phi()) * r.v3;
    if (std::abs(x + y) <= 1e-9) throw NumericalError("three_form_psi: u1 + u3 vanishes (branch singularity)");
    return -(y * r.dv1sq - x * r.dv3sq) / (x + y);
}

// (beta, phi)-average of three_form_psi: averaging x/(x+y) over the relative phase gives
// 1 when |v1| > |v3| and 0 otherwise.
inline double three_form_psi_averaged(const ParamPoint& p, double alpha, double step = 1e-5) {
    const ReducedGround r = reduced_ground(p, alpha, step);
    return std::abs(r.v1) > std::abs(r.v3) ? r.dv3sq : -r.dv1sq;
}

inline ThreeFormSample displaced_three_form_analytic(double h0, double alpha, double beta, double delta_x) {
    const double cc = std::cos(alpha) * std::cos(beta);
    const double den = delta_x * delta_x + h0 * h0 + 2.0 * h0 * delta_x * cc;
    if (den <= 1e-12 * std::max(h0 * h0, delta_x * delta_x))
        throw NumericalError("displaced_three_form_analytic: monopole lies on the integration sphere");
    const double v = h0 * h0 * h0 * std::cos(alpha) * std::sin(alpha) * (h0 + delta_x * cc) / (den * den);
    return {v, Route::displaced_analytic, "gauge-invariant"};
}

}  // namespace tensorpole::geometry
