#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "linalg.hpp"

namespace tensorpole::model {

// lambda_1 .. lambda_8, index 0 .. 7
inline Matrix3c gellmann(int k) {
    Matrix3c m;
    switch (k) {
        case 1: m(0, 1) = 1.0; m(1, 0) = 1.0; break;
        case 2: m(0, 1) = -I; m(1, 0) = I; break;
        case 3: m(0, 0) = 1.0; m(1, 1) = -1.0; break;
        case 4: m(0, 2) = 1.0; m(2, 0) = 1.0; break;
        case 5: m(0, 2) = -I; m(2, 0) = I; break;
        case 6: m(1, 2) = 1.0; m(2, 1) = 1.0; break;
        case 7: m(1, 2) = -I; m(2, 1) = I; break;
        case 8: {
            const double r = 1.0 / std::sqrt(3.0);
            m(0, 0) = r; m(1, 1) = r; m(2, 2) = -2.0 * r;
            break;
        }
        default: throw ConfigError("Gell-Mann index out of range: " + std::to_string(k));
    }
    return m;
}

struct GellMannCoeffs {
    std::array<double, 8> c{};  // c[k-1] multiplies lambda_k

    double operator[](int k) const { return c[k - 1]; }

    Matrix3c assemble() const {
        Matrix3c m;
        for (int k = 1; k <= 8; ++k) m = m + cplx(c[k - 1]) * gellmann(k);
        return m;
    }
};

inline GellMannCoeffs gellmann_decompose(const Matrix3c& h) {
    const cplx tr = trace(h);
    const double scale = std::max(max_abs(h), 1e-300);
    if (std::abs(tr) > 1e-12 * scale)
        throw ConfigError("gellmann_decompose: input is not traceless (trace = " + std::to_string(tr.real()) +
                          (tr.imag() >= 0 ? "+" : "") + std::to_string(tr.imag()) + "i)");
    GellMannCoeffs g;
    for (int k = 1; k <= 8; ++k) g.c[k - 1] = 0.5 * std::real(trace(h * gellmann(k)));
    return g;
}

enum class Perturbation { lambda4, lambda5 };

inline Perturbation parse_perturbation(std::string_view s) {
    if (s == "lambda4" || s == "l4" || s == "4") return Perturbation::lambda4;
    if (s == "lambda5" || s == "l5" || s == "5") return Perturbation::lambda5;
    throw ConfigError("unknown perturbation '" + std::string(s) + "' (expected lambda4 or lambda5)");
}

inline Matrix3c perturbation_term(Perturbation kind, double strength) {
    return cplx(strength) * gellmann(kind == Perturbation::lambda4 ? 4 : 5);
}

}  // namespace tensorpole::model
