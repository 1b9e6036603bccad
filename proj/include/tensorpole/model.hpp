#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "linalg.hpp"

namespace tensorpole::model {

inline double wrap_angle(double x) {
    double r = std::fmod(x, two_pi);
    if (r < 0.0) r += two_pi;
    if (r >= two_pi) r = 0.0;
    return r;
}

// Frequencies in rad/us, angles in rad.
class ParamPoint {
public:
    ParamPoint() = default;
    ParamPoint(double h0, double alpha, double beta, double phi, double bz = 0.0, double delta_x = 0.0)
        : h0_(h0), alpha_(alpha), beta_(wrap_angle(beta)), phi_(wrap_angle(phi)), bz_(bz), delta_x_(delta_x) {
        if (!std::isfinite(h0) || !std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(phi) ||
            !std::isfinite(bz) || !std::isfinite(delta_x))
            throw ConfigError("ParamPoint: non-finite input");
        if (h0 < 0.0) throw ConfigError("ParamPoint: h0 must be >= 0, got " + std::to_string(h0));
        alpha_ = std::clamp(alpha, 0.0, pi / 2);
    }

    double h0() const { return h0_; }
    double alpha() const { return alpha_; }
    double beta() const { return beta_; }
    double phi() const { return phi_; }
    double bz() const { return bz_; }
    double delta_x() const { return delta_x_; }

    ParamPoint with_alpha(double a) const { return {h0_, a, beta_, phi_, bz_, delta_x_}; }
    ParamPoint with_beta(double b) const { return {h0_, alpha_, b, phi_, bz_, delta_x_}; }
    ParamPoint with_phi(double f) const { return {h0_, alpha_, beta_, f, bz_, delta_x_}; }
    ParamPoint with_bz(double b) const { return {h0_, alpha_, beta_, phi_, b, delta_x_}; }
    ParamPoint with_delta_x(double d) const { return {h0_, alpha_, beta_, phi_, bz_, d}; }

private:
    double h0_ = 0.0, alpha_ = 0.0, beta_ = 0.0, phi_ = 0.0, bz_ = 0.0, delta_x_ = 0.0;
};

struct CartesianPoint {
    double qx = 0.0, qy = 0.0, qz = 0.0, qw = 0.0;

    double norm() const { return std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw); }
};

inline CartesianPoint to_cartesian(const ParamPoint& p) {
    const double ca = std::cos(p.alpha()), sa = std::sin(p.alpha());
    return {p.h0() * ca * std::cos(p.beta()), p.h0() * ca * std::sin(p.beta()),
            p.h0() * sa * std::cos(p.phi()), p.h0() * sa * std::sin(p.phi())};
}

inline ParamPoint from_cartesian(const CartesianPoint& q, double bz = 0.0, double delta_x = 0.0) {
    const double rxy = std::hypot(q.qx, q.qy), rzw = std::hypot(q.qz, q.qw);
    return {std::hypot(rxy, rzw), std::atan2(rzw, rxy), std::atan2(q.qy, q.qx), std::atan2(q.qw, q.qz), bz,
            delta_x};
}

inline Hamiltonian3 bz_term(double bz) {
    const double d = bz / std::sqrt(2.0);
    return Matrix3c::diagonal(d, 0.0, -d);
}

inline Hamiltonian3 hamiltonian_from_cartesian(const CartesianPoint& q, double bz = 0.0, double delta_x = 0.0) {
    Hamiltonian3 h = bz_term(bz);
    h(0, 1) = cplx(q.qx + delta_x, -q.qy);
    h(1, 0) = cplx(q.qx + delta_x, q.qy);
    h(1, 2) = cplx(q.qz, q.qw);
    h(2, 1) = cplx(q.qz, -q.qw);
    return h;
}

// No normalization of the angles: used for stencils and modulations that may leave [0, pi/2].
inline Hamiltonian3 hamiltonian_at(double h0, double alpha, double beta, double phi, double bz = 0.0,
                                   double delta_x = 0.0) {
    Hamiltonian3 h = bz_term(bz);
    const double c = h0 * std::cos(alpha), s = h0 * std::sin(alpha);
    h(0, 1) = c * std::polar(1.0, -beta) + delta_x;
    h(1, 0) = c * std::polar(1.0, beta) + delta_x;
    h(1, 2) = s * std::polar(1.0, phi);
    h(2, 1) = s * std::polar(1.0, -phi);
    return h;
}

inline Hamiltonian3 build_hamiltonian(const ParamPoint& p) {
    return hamiltonian_at(p.h0(), p.alpha(), p.beta(), p.phi(), p.bz(), p.delta_x());
}

inline double hermitian_defect(const Matrix3c& h) { return max_abs(h - adjoint(h)); }

enum class Axis { alpha = 0, beta = 1, phi = 2 };

inline constexpr Axis all_axes[3] = {Axis::alpha, Axis::beta, Axis::phi};

inline std::string_view axis_name(Axis a) {
    switch (a) {
        case Axis::alpha: return "alpha";
        case Axis::beta: return "beta";
        case Axis::phi: return "phi";
    }
    return "?";
}

inline Axis parse_axis(std::string_view s) {
    if (s == "alpha" || s == "a") return Axis::alpha;
    if (s == "beta" || s == "b") return Axis::beta;
    if (s == "phi" || s == "f") return Axis::phi;
    throw ConfigError("unknown axis '" + std::string(s) + "' (expected alpha, beta or phi)");
}

inline Hamiltonian3 derivative_at(double h0, double alpha, double beta, double phi, Axis axis) {
    Hamiltonian3 d;
    const double c = h0 * std::cos(alpha), s = h0 * std::sin(alpha);
    switch (axis) {
        case Axis::alpha:
            d(0, 1) = -s * std::polar(1.0, -beta);
            d(1, 0) = -s * std::polar(1.0, beta);
            d(1, 2) = c * std::polar(1.0, phi);
            d(2, 1) = c * std::polar(1.0, -phi);
            break;
        case Axis::beta:
            d(0, 1) = -I * c * std::polar(1.0, -beta);
            d(1, 0) = I * c * std::polar(1.0, beta);
            break;
        case Axis::phi:
            d(1, 2) = I * s * std::polar(1.0, phi);
            d(2, 1) = -I * s * std::polar(1.0, -phi);
            break;
    }
    return d;
}

inline Hamiltonian3 param_derivative(const ParamPoint& p, Axis axis) {
    return derivative_at(p.h0(), p.alpha(), p.beta(), p.phi(), axis);
}

}  // namespace tensorpole::model
