#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace tensorpole::dynamics {

// n(t) = offset + amplitude * cos(omega t + phase)
struct RabiFit {
    double omega = 0.0;
    double amplitude = 0.0;
    double offset = 0.0;
    double phase = 0.0;
    double residual_rms = 0.0;
    bool constrained = false;  // fitted with the fixed-contrast model C sin^2(omega t / 2)
};

namespace detail {

template <int N>
bool solve_linear(std::array<std::array<double, N>, N> a, std::array<double, N> b, std::array<double, N>& x) {
    for (int c = 0; c < N; ++c) {
        int piv = c;
        for (int r = c + 1; r < N; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        if (std::abs(a[piv][c]) < 1e-300) return false;
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (int r = c + 1; r < N; ++r) {
            const double f = a[r][c] / a[c][c];
            for (int k = c; k < N; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    for (int r = N - 1; r >= 0; --r) {
        double s = b[r];
        for (int k = r + 1; k < N; ++k) s -= a[r][k] * x[k];
        x[r] = s / a[r][r];
    }
    return true;
}

// best (c, a, b) for fixed omega; returns the sum of squared residuals
inline double linear_fit(const std::vector<double>& t, const std::vector<double>& y, double omega,
                         std::array<double, 3>& coef) {
    std::array<std::array<double, 3>, 3> m{};
    std::array<double, 3> rhs{};
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double phi[3] = {1.0, std::cos(omega * t[i]), std::sin(omega * t[i])};
        for (int r = 0; r < 3; ++r) {
            rhs[r] += phi[r] * y[i];
            for (int c = 0; c < 3; ++c) m[r][c] += phi[r] * phi[c];
        }
    }
    if (!solve_linear<3>(m, rhs, coef)) return std::numeric_limits<double>::infinity();
    double ss = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double r = coef[0] + coef[1] * std::cos(omega * t[i]) + coef[2] * std::sin(omega * t[i]) - y[i];
        ss += r * r;
    }
    return ss;
}

}  // namespace detail

// Coarse grid over omega (variable projection), then Gauss-Newton on (c, a, b, omega).
inline RabiFit fit_sinusoid(const std::vector<double>& t, const std::vector<double>& y, double omega_max = 0.0) {
    if (t.size() != y.size() || t.size() < 8) throw NumericalError("fit_sinusoid: need at least 8 samples");
    const double span = t.back() - t.front();
    if (!(span > 0.0)) throw NumericalError("fit_sinusoid: zero time span");
    const double nyquist = pi * static_cast<double>(t.size() - 1) / span;
    if (omega_max <= 0.0 || omega_max > nyquist) omega_max = nyquist;
    const double step = 0.25 * two_pi / span;
    double best_w = step, best_ss = std::numeric_limits<double>::infinity();
    std::array<double, 3> coef{};
    for (double w = 0.5 * step; w <= omega_max; w += step) {
        const double ss = detail::linear_fit(t, y, w, coef);
        if (ss < best_ss) {
            best_ss = ss;
            best_w = w;
        }
    }
    std::array<double, 3> lin{};
    detail::linear_fit(t, y, best_w, lin);
    std::array<double, 4> p{lin[0], lin[1], lin[2], best_w};
    double lambda = 1e-6;
    auto sse = [&](const std::array<double, 4>& q) {
        double s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double r = q[0] + q[1] * std::cos(q[3] * t[i]) + q[2] * std::sin(q[3] * t[i]) - y[i];
            s += r * r;
        }
        return s;
    };
    double cur = sse(p);
    for (int it = 0; it < 100; ++it) {
        std::array<std::array<double, 4>, 4> jtj{};
        std::array<double, 4> jtr{};
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double c = std::cos(p[3] * t[i]), s = std::sin(p[3] * t[i]);
            const double r = p[0] + p[1] * c + p[2] * s - y[i];
            const double j[4] = {1.0, c, s, t[i] * (-p[1] * s + p[2] * c)};
            for (int a = 0; a < 4; ++a) {
                jtr[a] += j[a] * r;
                for (int b = 0; b < 4; ++b) jtj[a][b] += j[a] * j[b];
            }
        }
        bool improved = false;
        for (int tries = 0; tries < 20 && !improved; ++tries) {
            auto damped = jtj;
            for (int a = 0; a < 4; ++a) damped[a][a] *= 1.0 + lambda;
            std::array<double, 4> d{};
            if (!detail::solve_linear<4>(damped, jtr, d)) break;
            std::array<double, 4> q{p[0] - d[0], p[1] - d[1], p[2] - d[2], p[3] - d[3]};
            const double s = sse(q);
            if (s < cur) {
                const double rel = (cur - s) / std::max(cur, 1e-300);
                p = q;
                cur = s;
                lambda = std::max(lambda * 0.1, 1e-12);
                improved = true;
                if (rel < 1e-14) it = 1000;
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved) break;
    }
    RabiFit f;
    f.offset = p[0];
    f.amplitude = std::hypot(p[1], p[2]);
    f.phase = std::atan2(-p[2], p[1]);
    f.omega = std::abs(p[3]);
    if (p[3] < 0.0) f.phase = -f.phase;
    f.residual_rms = std::sqrt(cur / static_cast<double>(t.size()));
    return f;
}

// n(t) = contrast * sin^2(omega t / 2), one parameter; for traces covering less than a period.
inline RabiFit fit_constrained(const std::vector<double>& t, const std::vector<double>& y, double contrast,
                               double omega_max) {
    auto sse = [&](double w) {
        double s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double r = contrast * std::pow(std::sin(0.5 * w * t[i]), 2) - y[i];
            s += r * r;
        }
        return s;
    };
    // coarse scan then golden section
    const int n = 400;
    double best = 0.0, best_s = sse(0.0);
    for (int k = 1; k <= n; ++k) {
        const double w = omega_max * k / n;
        const double s = sse(w);
        if (s < best_s) {
            best_s = s;
            best = w;
        }
    }
    double a = std::max(0.0, best - omega_max / n), b = best + omega_max / n;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - g * (b - a), x2 = a + g * (b - a), f1 = sse(x1), f2 = sse(x2);
    for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, b); ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = sse(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = sse(x2);
        }
    }
    RabiFit f;
    f.omega = 0.5 * (a + b);
    f.amplitude = 0.5 * contrast;
    f.offset = 0.5 * contrast;
    f.phase = pi;
    f.residual_rms = std::sqrt(sse(f.omega) / static_cast<double>(t.size()));
    f.constrained = true;
    return f;
}

}  // namespace tensorpole::dynamics
