#pragma once

#include <array>
#include <cmath>
#include <complex>

namespace tensorpole {

using cplx = std::complex<double>;
inline constexpr cplx I{0.0, 1.0};
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

struct Vector3c {
    std::array<cplx, 3> v{};

    cplx& operator[](int i) { return v[i]; }
    const cplx& operator[](int i) const { return v[i]; }
};

struct Matrix3c {
    std::array<std::array<cplx, 3>, 3> a{};

    cplx& operator()(int i, int j) { return a[i][j]; }
    const cplx& operator()(int i, int j) const { return a[i][j]; }

    static Matrix3c identity() {
        Matrix3c m;
        for (int i = 0; i < 3; ++i) m(i, i) = 1.0;
        return m;
    }
    static Matrix3c diagonal(cplx d0, cplx d1, cplx d2) {
        Matrix3c m;
        m(0, 0) = d0;
        m(1, 1) = d1;
        m(2, 2) = d2;
        return m;
    }
};

using Hamiltonian3 = Matrix3c;

inline Matrix3c operator+(const Matrix3c& x, const Matrix3c& y) {
    Matrix3c r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = x(i, j) + y(i, j);
    return r;
}
inline Matrix3c operator-(const Matrix3c& x, const Matrix3c& y) {
    Matrix3c r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = x(i, j) - y(i, j);
    return r;
}
inline Matrix3c operator*(cplx s, const Matrix3c& x) {
    Matrix3c r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = s * x(i, j);
    return r;
}
inline Matrix3c operator*(const Matrix3c& x, const Matrix3c& y) {
    Matrix3c r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r(i, j) = x(i, 0) * y(0, j) + x(i, 1) * y(1, j) + x(i, 2) * y(2, j);
    return r;
}
inline Vector3c operator*(const Matrix3c& x, const Vector3c& u) {
    Vector3c r;
    for (int i = 0; i < 3; ++i) r[i] = x(i, 0) * u[0] + x(i, 1) * u[1] + x(i, 2) * u[2];
    return r;
}
inline Vector3c operator+(const Vector3c& x, const Vector3c& y) {
    return {{x[0] + y[0], x[1] + y[1], x[2] + y[2]}};
}
inline Vector3c operator-(const Vector3c& x, const Vector3c& y) {
    return {{x[0] - y[0], x[1] - y[1], x[2] - y[2]}};
}
inline Vector3c operator*(cplx s, const Vector3c& x) { return {{s * x[0], s * x[1], s * x[2]}}; }

inline Matrix3c adjoint(const Matrix3c& x) {
    Matrix3c r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = std::conj(x(j, i));
    return r;
}
inline Matrix3c conj(const Matrix3c& x) {
    Matrix3c r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = std::conj(x(i, j));
    return r;
}
inline cplx trace(const Matrix3c& x) { return x(0, 0) + x(1, 1) + x(2, 2); }

inline cplx det(const Matrix3c& m) {
    return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
           m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
           m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

// largest entry modulus
inline double max_abs(const Matrix3c& x) {
    double r = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r = std::max(r, std::abs(x(i, j)));
    return r;
}
inline double frobenius(const Matrix3c& x) {
    double r = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r += std::norm(x(i, j));
    return std::sqrt(r);
}

// <x|y>, antilinear in x
inline cplx dot(const Vector3c& x, const Vector3c& y) {
    return std::conj(x[0]) * y[0] + std::conj(x[1]) * y[1] + std::conj(x[2]) * y[2];
}
inline double norm(const Vector3c& x) { return std::sqrt(std::real(dot(x, x))); }
inline double max_abs(const Vector3c& x) {
    return std::max({std::abs(x[0]), std::abs(x[1]), std::abs(x[2])});
}
inline Vector3c normalized(const Vector3c& x) { return (1.0 / norm(x)) * x; }

// conj(x) cross conj(y): orthogonal to both x and y under <.|.>
inline Vector3c cross_conj(const Vector3c& x, const Vector3c& y) {
    return {{std::conj(x[1] * y[2] - x[2] * y[1]), std::conj(x[2] * y[0] - x[0] * y[2]),
             std::conj(x[0] * y[1] - x[1] * y[0])}};
}

inline cplx matrix_element(const Vector3c& bra, const Matrix3c& op, const Vector3c& ket) {
    return dot(bra, op * ket);
}

}  // namespace tensorpole
