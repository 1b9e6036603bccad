#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "errors.hpp"
#include "linalg.hpp"
#include "model.hpp"

namespace tensorpole::spectral {

enum class Gauge { v2_real, largest_component };

// Per-state record of which phase convention was actually applied.
enum class GaugeLabel { v2_real, largest_component, degenerate };

inline std::string gauge_label_name(GaugeLabel g) {
    switch (g) {
        case GaugeLabel::v2_real: return "v2-real";
        case GaugeLabel::largest_component: return "largest-component";
        case GaugeLabel::degenerate: return "degenerate";
    }
    return "?";
}

struct EigenSystem {
    std::array<double, 3> energies{};
    std::array<Vector3c, 3> states{};
    std::array<GaugeLabel, 3> gauge{};
    bool degenerate = false;
    bool used_jacobi = false;

    const Vector3c& ground() const { return states[0]; }
};

namespace detail {

inline constexpr double cardano_discriminant_floor = 1e-14;
inline constexpr double degeneracy_tol = 1e-12;
inline constexpr double gauge_floor = 1e-9;

// Cyclic complex Jacobi; returns ascending eigenpairs.
inline void jacobi(const Matrix3c& h, std::array<double, 3>& w, std::array<Vector3c, 3>& vec) {
    Matrix3c a = h, v = Matrix3c::identity();
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = std::norm(a(0, 1)) + std::norm(a(0, 2)) + std::norm(a(1, 2));
        double diag = std::norm(a(0, 0)) + std::norm(a(1, 1)) + std::norm(a(2, 2));
        if (off <= 1e-34 * diag || off == 0.0) break;
        for (int p = 0; p < 2; ++p)
            for (int q = p + 1; q < 3; ++q) {
                const double apq = std::abs(a(p, q));
                if (apq == 0.0) continue;
                const cplx phase = a(p, q) / apq;
                const double app = std::real(a(p, p)), aqq = std::real(a(q, q));
                const double theta = 0.5 * std::atan2(2.0 * apq, aqq - app);
                const double c = std::cos(theta), s = std::sin(theta);
                // rotation R in the (p,q) plane: columns p,q mixed with the phase of a(p,q)
                Matrix3c r = Matrix3c::identity();
                r(p, p) = c;
                r(q, q) = c;
                r(p, q) = s * phase;
                r(q, p) = -s * std::conj(phase);
                a = adjoint(r) * a * r;
                v = v * r;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
            }
    }
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int i, int j) { return std::real(a(i, i)) < std::real(a(j, j)); });
    for (int k = 0; k < 3; ++k) {
        w[k] = std::real(a(idx[k], idx[k]));
        for (int i = 0; i < 3; ++i) vec[k][i] = v(i, idx[k]);
    }
}

// Null vector of (h - lambda): best-conditioned cross product of row pairs.
inline Vector3c null_vector(const Matrix3c& h, double lambda) {
    Matrix3c m = h;
    for (int i = 0; i < 3; ++i) m(i, i) -= lambda;
    Vector3c rows[3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) rows[i][j] = std::conj(m(i, j));
    // rows[i] holds conj of row i so that dot(rows[i], x) = (m x)_i
    Vector3c best;
    double best_n = -1.0;
    const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (auto& pr : pairs) {
        Vector3c c = cross_conj(rows[pr[0]], rows[pr[1]]);
        const double n = norm(c);
        if (n > best_n) {
            best_n = n;
            best = c;
        }
    }
    if (best_n <= 0.0) return {};
    return (1.0 / best_n) * best;
}

inline double residual(const Matrix3c& h, double e, const Vector3c& v) {
    return norm(h * v - e * v);
}

inline bool cardano(const Matrix3c& h, std::array<double, 3>& w, std::array<Vector3c, 3>& vec) {
    const double m = std::real(trace(h)) / 3.0;
    Matrix3c a = h;
    for (int i = 0; i < 3; ++i) a(i, i) -= m;
    const double p2 = frobenius(a) * frobenius(a) / 6.0;
    if (p2 == 0.0) return false;
    const double p = std::sqrt(p2);
    const double q = std::real(det(a)) / 2.0;
    double r = q / (p * p2);
    r = std::clamp(r, -1.0, 1.0);
    if (1.0 - r * r < cardano_discriminant_floor) return false;
    const double t = std::acos(r) / 3.0;
    const double l_top = m + 2.0 * p * std::cos(t);
    const double l_bot = m + 2.0 * p * std::cos(t + 2.0 * pi / 3.0);
    const double l_mid = 3.0 * m - l_top - l_bot;
    std::array<double, 3> l{l_bot, l_mid, l_top};
    // the extreme eigenvalue farther from the middle one is the best isolated
    const int iso = (l_mid - l_bot) > (l_top - l_mid) ? 0 : 2;
    const int other = 2 - iso;
    Vector3c v_iso = null_vector(h, l[iso]);
    Vector3c v_oth = null_vector(h, l[other]);
    if (norm(v_iso) == 0.0 || norm(v_oth) == 0.0) return false;
    v_oth = normalized(v_oth - dot(v_iso, v_oth) * v_iso);
    Vector3c v_mid = normalized(cross_conj(v_iso, v_oth));
    vec[iso] = v_iso;
    vec[other] = v_oth;
    vec[1] = v_mid;
    for (int k = 0; k < 3; ++k) w[k] = std::real(matrix_element(vec[k], h, vec[k]));
    if (!(w[0] <= w[1] && w[1] <= w[2])) return false;
    const double scale = std::max(max_abs(h), 1e-300);
    for (int k = 0; k < 3; ++k)
        if (residual(h, w[k], vec[k]) > 1e-13 * scale) return false;
    return true;
}

inline void fix_phase(Vector3c& v, int index) {
    const double a = std::abs(v[index]);
    if (a == 0.0) return;
    v = (std::conj(v[index]) / a) * v;
    v[index] = a;
}

inline int largest_component(const Vector3c& v) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(v[i]) > std::abs(v[best]) * (1.0 + 1e-12)) best = i;
    return best;
}

}  // namespace detail

inline EigenSystem eigensystem(const Hamiltonian3& h, Gauge gauge = Gauge::v2_real) {
    const double scale = max_abs(h);
    if (model::hermitian_defect(h) > 1e-12 * std::max(scale, 1e-300))
        throw NumericalError("eigensystem: input is not Hermitian (defect " +
                             std::to_string(model::hermitian_defect(h)) + ")");
    EigenSystem es;
    if (scale == 0.0) {
        es.energies = {0.0, 0.0, 0.0};
        es.states = {Vector3c{{1.0, 0.0, 0.0}}, Vector3c{{0.0, 1.0, 0.0}}, Vector3c{{0.0, 0.0, 1.0}}};
        es.gauge = {GaugeLabel::degenerate, GaugeLabel::degenerate, GaugeLabel::degenerate};
        es.degenerate = true;
        return es;
    }
    if (!detail::cardano(h, es.energies, es.states)) {
        detail::jacobi(h, es.energies, es.states);
        es.used_jacobi = true;
    }

    const double tol = detail::degeneracy_tol * scale;
    const bool d01 = es.energies[1] - es.energies[0] <= tol;
    const bool d12 = es.energies[2] - es.energies[1] <= tol;
    if (d01 || d12) {
        es.degenerate = true;
        const Vector3c canon[3] = {{{1.0, 0.0, 0.0}}, {{0.0, 1.0, 0.0}}, {{0.0, 0.0, 1.0}}};
        if (d01 && d12) {
            for (int k = 0; k < 3; ++k) {
                es.states[k] = canon[k];
                es.gauge[k] = GaugeLabel::degenerate;
            }
            const double e = (es.energies[0] + es.energies[1] + es.energies[2]) / 3.0;
            es.energies = {e, e, e};
            return es;
        }
        const int iso = d01 ? 2 : 0;
        const int lo = d01 ? 0 : 1;
        Vector3c v_iso = es.states[iso];
        if (gauge == Gauge::v2_real && std::abs(v_iso[1]) > detail::gauge_floor) {
            detail::fix_phase(v_iso, 1);
            es.gauge[iso] = GaugeLabel::v2_real;
        } else {
            detail::fix_phase(v_iso, detail::largest_component(v_iso));
            es.gauge[iso] = GaugeLabel::largest_component;
        }
        es.states[iso] = v_iso;
        int filled = 0;
        Vector3c basis[2];
        for (const auto& e : canon) {
            if (filled == 2) break;
            Vector3c w = e - dot(v_iso, e) * v_iso;
            if (filled == 1) w = w - dot(basis[0], w) * basis[0];
            if (norm(w) > 1e-3) basis[filled++] = normalized(w);
        }
        es.states[lo] = basis[0];
        es.states[lo + 1] = basis[1];
        es.gauge[lo] = es.gauge[lo + 1] = GaugeLabel::degenerate;
        const double e = 0.5 * (es.energies[lo] + es.energies[lo + 1]);
        es.energies[lo] = es.energies[lo + 1] = e;
        return es;
    }

    for (int k = 0; k < 3; ++k) {
        Vector3c& v = es.states[k];
        if (gauge == Gauge::v2_real && std::abs(v[1]) > detail::gauge_floor) {
            detail::fix_phase(v, 1);
            es.gauge[k] = GaugeLabel::v2_real;
        } else {
            detail::fix_phase(v, detail::largest_component(v));
            es.gauge[k] = GaugeLabel::largest_component;
        }
    }
    return es;
}

inline std::array<double, 3> eigenvalues(const Hamiltonian3& h) { return eigensystem(h).energies; }

// Closed forms on the qz = qw = 0 slice, returned ascending.
inline std::array<double, 3> analytic_eigenvalues_planar(double qx, double qy, double bz) {
    const double b = bz / std::sqrt(2.0);
    const double root = std::sqrt(bz * bz / 2.0 + 4.0 * (qx * qx + qy * qy));
    std::array<double, 3> e{0.5 * (b - root), -b, 0.5 * (b + root)};
    std::sort(e.begin(), e.end());
    return e;
}

enum class BandPair { lower, upper };

inline double band_gap(const Hamiltonian3& h, BandPair pair) {
    const auto e = eigenvalues(h);
    return std::max(0.0, pair == BandPair::lower ? e[1] - e[0] : e[2] - e[1]);
}

inline double min_adjacent_gap(const std::array<double, 3>& e) {
    return std::max(0.0, std::min(e[1] - e[0], e[2] - e[1]));
}

}  // namespace tensorpole::spectral
