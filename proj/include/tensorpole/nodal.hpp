#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "spectral.hpp"

namespace tensorpole::spectral {

enum class Plane { qx_qy, qz_qw, qx_qz };

inline std::string_view plane_name(Plane p) {
    switch (p) {
        case Plane::qx_qy: return "qx-qy";
        case Plane::qz_qw: return "qz-qw";
        case Plane::qx_qz: return "qx-qz";
    }
    return "?";
}

inline Plane parse_plane(std::string_view s) {
    if (s == "qx-qy" || s == "xy") return Plane::qx_qy;
    if (s == "qz-qw" || s == "zw") return Plane::qz_qw;
    if (s == "qx-qz" || s == "xz") return Plane::qx_qz;
    throw ConfigError("unknown plane '" + std::string(s) + "' (expected qx-qy, qz-qw or qx-qz)");
}

// Square grid [-extent, extent]^2 with `points` nodes per axis; `energy_scale` sets the
// nodal threshold (defaults to extent).
struct GridSpec {
    double extent = 1.0;
    int points = 256;
    double energy_scale = 0.0;
};

struct NodalPoint {
    double u = 0.0, v = 0.0, gap = 0.0;
};

struct NodalReport {
    Plane plane = Plane::qx_qy;
    GridSpec grid;
    double cell = 0.0;
    double threshold = 0.0;
    double ring_radius_estimate = 0.0;
    double min_gap = 0.0;
    // worst gap at a grid node nearest a true degeneracy: eigenvalues are 1-Lipschitz in q
    double grid_zero_bound = 0.0;
    std::size_t nodal_count = 0;
    std::vector<double> gap_map;  // row-major, row index = second axis
    std::vector<NodalPoint> local_minima;  // local minima with gap <= grid_zero_bound

    double coord(int i) const { return -grid.extent + i * cell; }
    double gap(int row, int col) const { return gap_map[static_cast<std::size_t>(row) * grid.points + col]; }
};

inline model::CartesianPoint plane_point(Plane plane, double u, double v) {
    switch (plane) {
        case Plane::qx_qy: return {u, v, 0.0, 0.0};
        case Plane::qz_qw: return {0.0, 0.0, u, v};
        case Plane::qx_qz: return {u, 0.0, v, 0.0};
    }
    return {};
}

inline NodalReport nodal_scan(double bz, Plane plane, GridSpec grid, const std::optional<Matrix3c>& perturbation = {}) {
    if (grid.points <= 1) throw ConfigError("nodal_scan: need at least 2 points per axis");
    if (!(grid.extent > 0.0)) throw ConfigError("nodal_scan: extent must be positive");
    if (grid.energy_scale <= 0.0) grid.energy_scale = grid.extent;
    NodalReport r;
    r.plane = plane;
    r.grid = grid;
    const int n = grid.points;
    r.cell = 2.0 * grid.extent / (n - 1);
    r.threshold = 1e-3 * grid.energy_scale;
    r.grid_zero_bound = 2.0 * r.cell;
    r.gap_map.assign(static_cast<std::size_t>(n) * n, 0.0);
    const Matrix3c extra = perturbation.value_or(Matrix3c{});
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
        const double v = r.coord(static_cast<int>(row));
        for (int col = 0; col < n; ++col) {
            const double u = r.coord(col);
            const Hamiltonian3 h = model::hamiltonian_from_cartesian(plane_point(plane, u, v), bz) + extra;
            r.gap_map[row * n + col] = min_adjacent_gap(eigenvalues(h));
        }
    });

    r.min_gap = *std::min_element(r.gap_map.begin(), r.gap_map.end());
    double radius_sum = 0.0;
    std::size_t count = 0;
    // if nothing dips below the threshold the ring has shrunk below the grid: use the minima
    const bool resolved = r.min_gap < r.threshold;
    for (int row = 0; row < n; ++row)
        for (int col = 0; col < n; ++col)
            if (resolved ? r.gap(row, col) < r.threshold : r.gap(row, col) <= r.min_gap * (1.0 + 1e-9)) {
                radius_sum += std::hypot(r.coord(col), r.coord(row));
                ++count;
            }
    r.nodal_count = count;
    r.ring_radius_estimate = count ? radius_sum / count : 0.0;

    for (int row = 0; row < n; ++row)
        for (int col = 0; col < n; ++col) {
            const double g = r.gap(row, col);
            if (g > r.grid_zero_bound) continue;
            bool is_min = true;
            for (int dr = -1; dr <= 1 && is_min; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    if (!dr && !dc) continue;
                    const int rr = row + dr, cc = col + dc;
                    if (rr < 0 || cc < 0 || rr >= n || cc >= n) continue;
                    if (r.gap(rr, cc) < g) {
                        is_min = false;
                        break;
                    }
                }
            if (is_min) r.local_minima.push_back({r.coord(col), r.coord(row), g});
        }
    return r;
}

// Row-major CSV, values scaled by 1/unit (e.g. 2*pi for MHz output).
inline void write_gap_map_csv(std::ostream& os, const NodalReport& r, double unit = 1.0) {
    const auto name = plane_name(r.plane);
    const std::string ax1(name.substr(0, 2)), ax2(name.substr(3));
    os << "# plane " << name << ", rows: " << ax2 << ", columns: " << ax1 << ", extent " << r.grid.extent / unit
       << ", points " << r.grid.points << ", cell " << r.cell / unit << "\n";
    os << ax2 << "\\" << ax1;
    for (int c = 0; c < r.grid.points; ++c) os << ',' << r.coord(c) / unit;
    os << '\n';
    for (int row = 0; row < r.grid.points; ++row) {
        os << r.coord(row) / unit;
        for (int c = 0; c < r.grid.points; ++c) os << ',' << r.gap(row, c) / unit;
        os << '\n';
    }
}

}  // namespace tensorpole::spectral
