#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include "errors.hpp"
#include "spectral.hpp"

namespace tensorpole::dynamics {

using Populations = std::array<double, 3>;  // (n_plus, n_zero, n_minus)
using Mat3 = std::array<std::array<double, 3>, 3>;

struct ReadoutModel {
    double r_plus = 2.0, r_zero = 3.0, r_minus = 1.0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

// Rows: direct readout, then with 0 <-> -1 swapped, then with 0 <-> +1 swapped.
inline Mat3 readout_matrix(const ReadoutModel& m) {
    return {{{m.r_plus, m.r_zero, m.r_minus}, {m.r_plus, m.r_minus, m.r_zero}, {m.r_zero, m.r_plus, m.r_minus}}};
}

inline double condition_number(const Mat3& r) {
    Matrix3c rtr;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += r[k][i] * r[k][j];
            rtr(i, j) = s;
        }
    const auto ev = spectral::eigenvalues(rtr);
    const double hi = std::sqrt(std::max(ev[2], 0.0)), lo = std::sqrt(std::max(ev[0], 0.0));
    if (!(lo > 0.0) || lo <= hi * 1e-15) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

inline constexpr double max_readout_condition = 1e8;

inline Mat3 readout_inverse(const ReadoutModel& m) {
    const Mat3 r = readout_matrix(m);
    const double kappa = condition_number(r);
    if (!(kappa <= max_readout_condition))
        throw NumericalError("readout matrix is singular or ill-conditioned (condition " + std::to_string(kappa) +
                             ")");
    const double d = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
                     r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
                     r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
    Mat3 inv;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const int a = (j + 1) % 3, b = (j + 2) % 3, c = (i + 1) % 3, e = (i + 2) % 3;
            inv[i][j] = (r[a][c] * r[b][e] - r[a][e] * r[b][c]) / d;
        }
    return inv;
}

inline std::array<double, 3> readout_forward(const ReadoutModel& m, const Populations& n) {
    const Mat3 r = readout_matrix(m);
    std::array<double, 3> s{};
    for (int i = 0; i < 3; ++i) s[i] = r[i][0] * n[0] + r[i][1] * n[1] + r[i][2] * n[2];
    return s;
}

template <class Rng>
std::array<double, 3> readout_forward(const ReadoutModel& m, const Populations& n, Rng& rng) {
    auto s = readout_forward(m, n);
    if (m.sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, m.sigma);
        for (double& x : s) x += noise(rng);
    }
    return s;
}

inline Populations three_readout_solve(const std::array<double, 3>& s, const ReadoutModel& m) {
    const Mat3 inv = readout_inverse(m);
    Populations n{};
    for (int i = 0; i < 3; ++i) n[i] = inv[i][0] * s[0] + inv[i][1] * s[1] + inv[i][2] * s[2];
    return n;
}

}  // namespace tensorpole::dynamics
