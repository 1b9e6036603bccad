#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "spectral.hpp"

namespace tensorpole::invariants {

using model::ParamPoint;

inline constexpr int min_alpha_nodes = 11;

// sqrt(det g) of the ground band at (alpha, beta = phi = 0)
inline double metric_density(double h0, double bz, double alpha) {
    return 0.25 * geometry::three_form_from_metric(geometry::qgt_perturbative(ParamPoint(h0, alpha, 0.0, 0.0, bz)))
                      .value;
}

// G = (1/2pi^2)(2pi)^2 int 4 sqrt(det g) dalpha = 8 int sqrt(det g) dalpha
inline double dd_metric(double h0, double bz, int n_alpha = 201) {
    quadrature::require_simpson_nodes(n_alpha, min_alpha_nodes);
    const auto x = quadrature::nodes(0.0, pi / 2, n_alpha);
    const auto w = quadrature::simpson_weights(0.0, pi / 2, n_alpha);
    double s = 0.0;
    for (int i = 0; i < n_alpha; ++i) {
        try {
            s += w[i] * metric_density(h0, bz, x[i]);
        } catch (const NumericalError& e) {
            throw NumericalError("dd_metric: node " + std::to_string(i) + " (alpha=" + std::to_string(x[i]) +
                                 "): " + e.what());
        }
    }
    return 8.0 * s;
}

// Ground state at a boundary alpha. On an exact lower-pair degeneracy the state continuing the
// bz > h0 branch is chosen: the one lowest in energy under a small increase of bz.
inline Vector3c boundary_ground(double h0, double bz, double alpha) {
    const Hamiltonian3 h = model::hamiltonian_at(h0, alpha, 0.0, 0.0, bz);
    const auto es = spectral::eigensystem(h);
    const double scale = h0 > 0.0 ? h0 : max_abs(h);
    if (es.energies[1] - es.energies[0] > 1e-9 * scale) return es.ground();
    if (es.energies[2] - es.energies[1] <= 1e-9 * scale)
        throw DegenerateSpectrumError("boundary_ground: triple degeneracy at alpha=" + std::to_string(alpha));
    const Matrix3c dbz = model::bz_term(1.0);
    const Vector3c& a = es.states[0];
    const Vector3c& b = es.states[1];
    const double paa = std::real(matrix_element(a, dbz, a)), pbb = std::real(matrix_element(b, dbz, b));
    const cplx pab = matrix_element(a, dbz, b);
    // lowest eigenvector of [[paa, pab], [conj(pab), pbb]]
    const double mean = 0.5 * (paa + pbb), half = 0.5 * (paa - pbb);
    const double lo = mean - std::sqrt(half * half + std::norm(pab));
    Vector3c v;
    if (std::abs(pab) < 1e-300) {
        v = paa <= pbb ? a : b;
    } else {
        // (paa - lo) x + pab y = 0
        const cplx x = pab, y = lo - paa;
        v = normalized(x * a + y * b);
    }
    return v;
}

inline double boundary_weight(double h0, double bz, double alpha) {
    const Vector3c u = boundary_ground(h0, bz, alpha);
    return std::norm(u[0]) - std::norm(u[2]);
}

// -(1/2)(F_ab + F_fa) with F the connection curvature, at beta = phi = 0
inline double connection_density(double h0, double bz, double alpha) {
    const auto q = geometry::qgt_perturbative(ParamPoint(h0, alpha, 0.0, 0.0, bz));
    return -0.5 * (q.berry_curvature(0, 1) + q.berry_curvature(2, 0));
}

struct ConnectionResult {
    double boundary = 0.0;
    std::optional<double> quadrature;  // absent when a node sits on a degeneracy (bz = h0)
    std::string note;
};

inline ConnectionResult dd_connection(double h0, double bz, int n_alpha = 201) {
    quadrature::require_simpson_nodes(n_alpha, min_alpha_nodes);
    ConnectionResult r;
    r.boundary = boundary_weight(h0, bz, 0.0) - boundary_weight(h0, bz, pi / 2);
    try {
        // adaptive: the integrand sharpens near alpha = 0 as bz approaches h0
        const double integral = quadrature::adaptive_simpson(
            [&](double a) { return connection_density(h0, bz, a); }, 0.0, pi / 2, 1e-12, 30);
        r.quadrature = 2.0 * integral;
    } catch (const DegenerateSpectrumError& e) {
        r.note = std::string("quadrature skipped: ") + e.what();
    }
    return r;
}

inline double b_analytic(double h) {
    if (h < 0.0) throw ConfigError("b_analytic: h must be >= 0");
    if (h < 1.0) return 1.0;
    return -0.5 * (1.0 - h / std::sqrt(h * h + 8.0));
}

inline double dd_displacement(double h0, double delta_x, int n_alpha = 201, int n_beta = 201) {
    if (!(h0 > 0.0)) throw ConfigError("dd_displacement: h0 must be positive");
    if (std::abs(delta_x / h0) - 1.0 <= 0.02 && std::abs(delta_x / h0) - 1.0 >= -0.02)
        throw ConfigError("dd_displacement: |delta_x| within 2% of h0 puts the monopole on the sphere");
    quadrature::require_simpson_nodes(n_alpha);
    quadrature::require_simpson_nodes(n_beta);
    const auto xa = quadrature::nodes(0.0, pi / 2, n_alpha);
    const auto wa = quadrature::simpson_weights(0.0, pi / 2, n_alpha);
    const auto xb = quadrature::nodes(0.0, two_pi, n_beta);
    const auto wb = quadrature::simpson_weights(0.0, two_pi, n_beta);
    double s = 0.0;
    for (int i = 0; i < n_alpha; ++i) {
        double row = 0.0;
        for (int j = 0; j < n_beta; ++j)
            row += wb[j] * geometry::displaced_three_form_analytic(h0, xa[i], xb[j], delta_x).value;
        s += wa[i] * row;
    }
    // (1/2pi^2) * 2pi from the phi integral
    return s / pi;
}

// 2 int over alpha of the (beta, phi)-averaged psi-route 3-form; the integrand jumps where
// |v1| = |v3|, so each side is integrated separately.
inline double psi_route_integral(double h0, double bz) {
    const ParamPoint p(h0, 0.0, 0.0, 0.0, bz);
    auto side = [&](double a) {
        const auto r = geometry::reduced_ground(p, a);
        return std::abs(r.v1) - std::abs(r.v3);
    };
    // stay off the poles, where u2 may vanish for bz > h0
    const double eps = 1e-7;
    double lo = eps, hi = pi / 2 - eps;
    auto f = [&](double a) { return geometry::three_form_psi_averaged(p, a); };
    if (side(lo) * side(hi) >= 0.0) return 2.0 * quadrature::adaptive_simpson(f, lo, hi, 1e-9, 18);
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (side(mid) * side(eps) > 0.0 ? lo : hi) = mid;
    }
    const double cross = 0.5 * (lo + hi);
    return 2.0 * (quadrature::adaptive_simpson(f, eps, cross - 1e-12, 1e-9, 18) +
                  quadrature::adaptive_simpson(f, cross + 1e-12, pi / 2 - eps, 1e-9, 18));
}

enum class SweepAxis { bz, delta_x };

struct Methods {
    bool metric = true;
    bool connection = true;
    bool analytic = true;
    bool displacement = false;
};

struct Observables {
    double value = 0.0;  // axis value
    double h0 = 0.0, bz = 0.0, delta_x = 0.0;
    std::optional<double> dd_metric, dd_connection, b_analytic, dd_displacement;
    int grid_alpha = 0, grid_beta = 0;
    std::string error;
};

struct PhaseDiagram {
    SweepAxis axis = SweepAxis::bz;
    std::vector<Observables> points;
};

inline PhaseDiagram sweep(SweepAxis axis, const std::vector<double>& values, double h0, Methods methods,
                          int n_alpha = 201, int n_beta = 201, double fixed_bz = 0.0, double fixed_dx = 0.0) {
    for (std::size_t i = 1; i < values.size(); ++i)
        if (!(values[i] > values[i - 1])) throw ConfigError("sweep: values must be strictly increasing");
    if (axis == SweepAxis::delta_x) methods.displacement = true;
    PhaseDiagram d;
    d.axis = axis;
    d.points.resize(values.size());
    parallel_for(values.size(), [&](std::size_t i) {
        Observables& o = d.points[i];
        o.value = values[i];
        o.h0 = h0;
        o.bz = axis == SweepAxis::bz ? values[i] : fixed_bz;
        o.delta_x = axis == SweepAxis::delta_x ? values[i] : fixed_dx;
        o.grid_alpha = n_alpha;
        o.grid_beta = methods.displacement ? n_beta : 0;
        std::string err;
        auto attempt = [&](auto&& fn) {
            try {
                fn();
            } catch (const std::exception& e) {
                if (!err.empty()) err += "; ";
                err += e.what();
            }
        };
        if (axis == SweepAxis::bz) {
            if (methods.metric) attempt([&] { o.dd_metric = dd_metric(h0, o.bz, n_alpha); });
            if (methods.connection) attempt([&] { o.dd_connection = dd_connection(h0, o.bz, n_alpha).boundary; });
            if (methods.analytic && h0 > 0.0) attempt([&] { o.b_analytic = b_analytic(o.bz / h0); });
        }
        if (methods.displacement)
            attempt([&] { o.dd_displacement = dd_displacement(h0, o.delta_x, n_alpha, n_beta); });
        o.error = err;
    });
    return d;
}

inline void write_optional(std::ostream& os, const std::optional<double>& v) {
    if (v) os << *v;
}

// `unit` divides frequency-valued axis values (2 pi for MHz output).
inline void write_csv(std::ostream& os, const PhaseDiagram& d, double unit = 1.0) {
    os << "axis,value,G,B_numeric,B_analytic,DD_displacement,grid_alpha,grid_beta\n";
    for (const auto& o : d.points) {
        os << (d.axis == SweepAxis::bz ? "bz" : "dx") << ',' << o.value / unit << ',';
        write_optional(os, o.dd_metric);
        os << ',';
        write_optional(os, o.dd_connection);
        os << ',';
        write_optional(os, o.b_analytic);
        os << ',';
        write_optional(os, o.dd_displacement);
        os << ',' << o.grid_alpha << ',' << o.grid_beta << '\n';
    }
}

}  // namespace tensorpole::invariants
