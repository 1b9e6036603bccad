#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"

namespace tensorpole::quadrature {

inline void require_simpson_nodes(int n, int minimum = 3) {
    if (n < minimum || n % 2 == 0)
        throw ConfigError("Simpson grid needs an odd node count >= " + std::to_string(minimum) + ", got " +
                          std::to_string(n));
}

inline std::vector<double> simpson_weights(double a, double b, int n) {
    require_simpson_nodes(n);
    const double h = (b - a) / (n - 1);
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = (i == 0 || i == n - 1 ? 1.0 : (i % 2 ? 4.0 : 2.0)) * h / 3.0;
    return w;
}

inline std::vector<double> nodes(double a, double b, int n) {
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = i == n - 1 ? b : a + (b - a) * i / (n - 1);
    return x;
}

template <class F>
double simpson(F&& f, double a, double b, int n) {
    const auto w = simpson_weights(a, b, n);
    const auto x = nodes(a, b, n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += w[i] * f(x[i]);
    return s;
}

namespace detail {

template <class F>
double adaptive_step(F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                     int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol ||
        std::abs(delta) <= 1e-11 * (std::abs(fa) + std::abs(fm) + std::abs(fb)) * (b - a)) return left + right + delta / 15.0;
    return adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson with Richardson correction, absolute tolerance `tol`.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol = 1e-12, int max_depth = 40) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adaptive_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

}  // namespace tensorpole::quadrature
