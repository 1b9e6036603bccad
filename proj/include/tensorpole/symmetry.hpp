#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

#include "errors.hpp"
#include "gellmann.hpp"
#include "model.hpp"
#include "spectral.hpp"

namespace tensorpole::model {

inline constexpr std::uint64_t default_sample_seed = 20190215;

// Halton radical inverse
inline double radical_inverse(std::uint64_t n, std::uint64_t base) {
    double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
    while (n > 0) {
        r += f * static_cast<double>(n % base);
        n /= base;
        f *= inv;
    }
    return r;
}

// Quasi-random points in the 4-ball of the given radius: Halton (2,3,5,7) with rejection,
// starting at sequence index `seed`.
inline std::vector<CartesianPoint> ball_samples(double radius, int count = 32,
                                                std::uint64_t seed = default_sample_seed) {
    std::vector<CartesianPoint> out;
    for (std::uint64_t n = seed + 1; static_cast<int>(out.size()) < count; ++n) {
        CartesianPoint q{2.0 * radical_inverse(n, 2) - 1.0, 2.0 * radical_inverse(n, 3) - 1.0,
                         2.0 * radical_inverse(n, 5) - 1.0, 2.0 * radical_inverse(n, 7) - 1.0};
        if (q.norm() > 1.0) continue;
        out.push_back({radius * q.qx, radius * q.qy, radius * q.qz, radius * q.qw});
    }
    return out;
}

struct SymmetryReport {
    double chiral_residual = 0.0;
    double mirror1_residual = 0.0;
    double mirror2_residual = 0.0;
    double inversion_residual = 0.0;
    // PT is checked as complex conjugation on the qy = qw = 0 slice of every sample
    bool pt_applicable = true;
    double pt_residual = 0.0;
    std::size_t samples = 0;
};

using HamiltonianBuilder = std::function<Hamiltonian3(const CartesianPoint&)>;

inline HamiltonianBuilder model_builder(double bz, const Matrix3c& extra = Matrix3c{}) {
    return [bz, extra](const CartesianPoint& q) { return hamiltonian_from_cartesian(q, bz) + extra; };
}

inline SymmetryReport symmetry_report(const HamiltonianBuilder& build, const std::vector<CartesianPoint>& samples) {
    if (samples.empty()) throw ConfigError("symmetry_report: empty sample set");
    const Matrix3c u = Matrix3c::diagonal(1.0, -1.0, 1.0);
    const Matrix3c m1 = Matrix3c::diagonal(-1.0, 1.0, 1.0);
    const Matrix3c m2 = Matrix3c::diagonal(1.0, 1.0, -1.0);
    const Matrix3c ui = m1 * m2;
    SymmetryReport r;
    r.samples = samples.size();
    for (const auto& q : samples) {
        const Hamiltonian3 h = build(q);
        r.chiral_residual = std::max(r.chiral_residual, max_abs(h * u + u * h));
        const Hamiltonian3 h1 = build({-q.qx, -q.qy, q.qz, q.qw});
        const Hamiltonian3 h2 = build({q.qx, q.qy, -q.qz, -q.qw});
        const Hamiltonian3 hi = build({-q.qx, -q.qy, -q.qz, -q.qw});
        r.mirror1_residual = std::max(r.mirror1_residual, max_abs(m1 * h * m1 - h1));
        r.mirror2_residual = std::max(r.mirror2_residual, max_abs(m2 * h * m2 - h2));
        r.inversion_residual = std::max(r.inversion_residual, max_abs(ui * h * ui - hi));
        const Hamiltonian3 hs = build({q.qx, 0.0, q.qz, 0.0});
        r.pt_residual = std::max(r.pt_residual, max_abs(conj(hs) - hs));
    }
    return r;
}

inline Matrix3c sg220_hamiltonian(double kx, double ky, double kz) {
    Matrix3c m;
    m(0, 1) = m(1, 0) = ky;
    m(0, 2) = m(2, 0) = kx;
    m(1, 2) = m(2, 1) = -kz;
    return m;
}

inline double sg220_slice_check(const ParamPoint& p) {
    if (p.delta_x() != 0.0) throw ConfigError("sg220_slice_check: requires delta_x = 0");
    const double a = p.alpha() - pi / 4;
    const auto e1 = spectral::eigenvalues(build_hamiltonian(p));
    const auto e2 = spectral::eigenvalues(
        sg220_hamiltonian(p.h0() * std::sin(a), p.h0() * std::cos(a), p.bz() / std::sqrt(2.0)));
    double d = 0.0;
    for (int k = 0; k < 3; ++k) d = std::max(d, std::abs(e1[k] - e2[k]));
    return d;
}

}  // namespace tensorpole::model
