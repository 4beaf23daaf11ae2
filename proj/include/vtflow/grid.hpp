#pragma once

#include <cmath>
#include <vector>

#include "vtflow/common.hpp"
#include "vtflow/fundamental_diagram.hpp"

namespace vtflow {

/// Uniform space-time grid. dt in hours, dx in km. The schemes in this
/// library pin dx = u*dt so that free-flow characteristics cross exactly
/// one cell per step.
struct GridSpec {
    double dt = 0.0;
    double dx = 0.0;
    int n_cells = 0;
    double x_origin = 0.0;

    double length() const { return dx * n_cells; }
    double cell_center(int i) const { return x_origin + (i + 0.5) * dx; }
    /// Position of interface i, between cell i-1 and cell i. i in [0, n_cells].
    double interface(int i) const { return x_origin + i * dx; }
};

/// Builds the grid for a corridor of given length. The corridor must tile
/// exactly into cells of width u*dt.
inline GridSpec make_grid(const TriangularFD& fd, double dt_hr, double length_km,
                          double x_origin_km = 0.0) {
    if (!(dt_hr > 0.0) || !std::isfinite(dt_hr)) detail::invalid_fail("time step dt_hr", dt_hr);
    if (!(length_km > 0.0)) detail::invalid_fail("corridor length_km", length_km);
    const double dx = fd.u() * dt_hr;
    const double cells = length_km / dx;
    const double rounded = std::round(cells);
    if (rounded < 1.0 || std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells))
        detail::invalid_fail("length/(u*dt), must be a whole number of cells", cells);
    return GridSpec{dt_hr, dx, static_cast<int>(rounded), x_origin_km};
}

/// Cell densities at one time level.
struct GridState {
    int step = 0;
    double t = 0.0;
    GridSpec spec;
    std::vector<double> k;
};

inline GridState make_uniform_state(const GridSpec& spec, double k0) {
    return GridState{0, 0.0, spec, std::vector<double>(static_cast<size_t>(spec.n_cells), k0)};
}

}  // namespace vtflow
