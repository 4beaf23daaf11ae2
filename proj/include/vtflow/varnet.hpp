#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "vtflow/common.hpp"
#include "vtflow/fundamental_diagram.hpp"
#include "vtflow/source.hpp"

namespace vtflow {

// Time-space lattice for the variational solution. Nodes sit on a grid with
// time pitch dt and space pitch w*dt; every node emits links one level
// forward at the three slopes -w (one column left), 0 (same column) and
// +u (theta columns right). Requiring theta = u/w to be a whole number is
// what makes the slope-u links land on lattice columns. Link costs are the
// passing count at the link's slope plus the exact chord integral of the
// source potential, so shortest paths through the lattice reproduce the
// least-cost observer paths wherever those are themselves lattice paths.

enum class LinkSlope { Down, Stay, Up };  // -w, 0, +u

inline double slope_speed(const TriangularFD& fd, LinkSlope s) {
    switch (s) {
        case LinkSlope::Down: return -fd.w();
        case LinkSlope::Stay: return 0.0;
        default: return fd.u();
    }
}

/// Exact cost of a link: R(v)*tau plus the integral of the source potential
/// along the chord. R(-w)*tau = w*kappa*tau counts the whole jam passing a
/// backward observer; R(u)*tau = 0 since nobody passes a free-flow one.
inline double link_cost(const TriangularFD& fd, const ExogenousSource& src, double t0, double x0,
                        double tau, double v) {
    if (!(tau > 0.0) || !std::isfinite(tau)) detail::invalid_fail("link duration tau", tau);
    return fd.passing_rate(v) * tau +
           integral_of_potential_along_chord(src, t0, x0, t0 + tau, x0 + v * tau);
}

/// Discrete estimate of the same cost: the source potential sampled at the
/// chord midpoint times the duration, i.e. the midpoint rule for the chord
/// integral. Agrees with link_cost whenever the potential is linear across
/// the chord (constant rates, or chords inside one cell); kept as a
/// diagnostic for the quality of sampled-source lattices.
inline double link_cost_estimate(const TriangularFD& fd, const ExogenousSource& src, double t0,
                                 double x0, double tau, double v) {
    if (!(tau > 0.0) || !std::isfinite(tau)) detail::invalid_fail("link duration tau", tau);
    return fd.passing_rate(v) * tau + tau * src.potential(t0 + 0.5 * tau, x0 + 0.5 * v * tau);
}

struct NodeId {
    int level = 0;
    int ix = 0;
};

class VariationalNet {
public:
    VariationalNet(const TriangularFD& fd, int theta, double dt, int n_levels, int n_columns)
        : fd_(fd), theta_(theta), dt_(dt), pitch_(fd.w() * dt), n_levels_(n_levels),
          n_columns_(n_columns) {
        const size_t per = static_cast<size_t>(n_levels_ - 1) * static_cast<size_t>(n_columns_);
        constexpr double nan = std::numeric_limits<double>::quiet_NaN();
        for (auto* c : {&cost_down_, &cost_stay_, &cost_up_}) c->assign(per, nan);
    }

    const TriangularFD& fd() const { return fd_; }
    int theta() const { return theta_; }
    double dt() const { return dt_; }
    double pitch() const { return pitch_; }
    int levels() const { return n_levels_; }
    int columns() const { return n_columns_; }
    double node_time(int level) const { return level * dt_; }
    double node_x(int ix) const { return ix * pitch_; }

    size_t n_nodes() const {
        return static_cast<size_t>(n_levels_) * static_cast<size_t>(n_columns_);
    }
    size_t n_links() const {
        const size_t per_level = static_cast<size_t>(n_columns_) +
                                 static_cast<size_t>(n_columns_ - 1) +
                                 static_cast<size_t>(n_columns_ - theta_);
        return static_cast<size_t>(n_levels_ - 1) * per_level;
    }

    /// True when node (level, ix) has an outgoing link at the given slope.
    bool has_link(int level, int ix, LinkSlope s) const {
        if (level < 0 || level >= n_levels_ - 1 || ix < 0 || ix >= n_columns_) return false;
        if (s == LinkSlope::Down) return ix >= 1;
        if (s == LinkSlope::Up) return ix + theta_ < n_columns_;
        return true;
    }

    double cost(int level, int ix, LinkSlope s) const {
        if (!has_link(level, ix, s)) detail::domain_fail("link index", static_cast<double>(ix));
        return slot(s)[index(level, ix)];
    }

    void set_cost(int level, int ix, LinkSlope s, double c) {
        if (!has_link(level, ix, s)) detail::domain_fail("link index", static_cast<double>(ix));
        slot(s)[index(level, ix)] = c;
    }

private:
    size_t index(int level, int ix) const {
        return static_cast<size_t>(level) * static_cast<size_t>(n_columns_) +
               static_cast<size_t>(ix);
    }
    std::vector<double>& slot(LinkSlope s) {
        return s == LinkSlope::Down ? cost_down_ : s == LinkSlope::Stay ? cost_stay_ : cost_up_;
    }
    const std::vector<double>& slot(LinkSlope s) const {
        return s == LinkSlope::Down ? cost_down_ : s == LinkSlope::Stay ? cost_stay_ : cost_up_;
    }

    TriangularFD fd_;
    int theta_;
    double dt_;
    double pitch_;
    int n_levels_;
    int n_columns_;
    std::vector<double> cost_down_, cost_stay_, cost_up_;
};

/// Lattice over [0, horizon] x [0, length]. The horizon must be a whole
/// number of steps and the length a whole number of free-flow cells u*dt
/// (hence of pitches w*dt as well).
inline VariationalNet build_net(const TriangularFD& fd, double horizon_hr, double length_km,
                                double dt_hr, const ExogenousSource& src) {
    if (!(dt_hr > 0.0) || !std::isfinite(dt_hr)) detail::invalid_fail("time step dt_hr", dt_hr);
    const double theta_real = fd.theta();
    const double theta_round = std::round(theta_real);
    if (theta_round < 1.0 || std::abs(theta_real - theta_round) > 1e-9 * theta_real)
        detail::invalid_fail("speed ratio theta, must be a whole number", theta_real);
    const int theta = static_cast<int>(theta_round);

    const double steps = horizon_hr / dt_hr;
    if (!(steps >= 0.0) || std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
        detail::invalid_fail("horizon/dt, must be a whole number of steps", steps);
    const int n_t = static_cast<int>(std::round(steps));

    const double cells = length_km / (fd.u() * dt_hr);
    if (!(cells >= 1.0) || std::abs(cells - std::round(cells)) > 1e-9 * cells)
        detail::invalid_fail("length/(u*dt), must be a whole number of cells", cells);
    const int n_x = static_cast<int>(std::round(cells)) * theta;

    VariationalNet net(fd, theta, dt_hr, n_t + 1, n_x + 1);
    for (int level = 0; level + 1 < net.levels(); ++level) {
        const double t0 = net.node_time(level);
        for (int ix = 0; ix < net.columns(); ++ix) {
            const double x0 = net.node_x(ix);
            for (LinkSlope s : {LinkSlope::Down, LinkSlope::Stay, LinkSlope::Up}) {
                if (!net.has_link(level, ix, s)) continue;
                net.set_cost(level, ix, s,
                             link_cost(fd, src, t0, x0, dt_hr, slope_speed(fd, s)));
            }
        }
    }
    return net;
}

/// N at every lattice node from counts given on the t = 0 nodes, by one
/// forward sweep over time levels. Cost ties are broken toward the path
/// whose first link has the most negative slope, so the implied argmin
/// path is deterministic.
inline std::vector<std::vector<double>> solve_all(const VariationalNet& net,
                                                  std::span<const double> g0) {
    if (g0.size() != static_cast<size_t>(net.columns()))
        detail::invalid_fail("boundary value count", static_cast<double>(g0.size()));
    std::vector<std::vector<double>> n(static_cast<size_t>(net.levels()));
    n[0].assign(g0.begin(), g0.end());
    // Rank of the first link of the best path into each node of the current
    // level; boundary nodes carry the neutral sentinel.
    constexpr int kNoPath = 3;
    std::vector<int> prev_rank(static_cast<size_t>(net.columns()), kNoPath);
    std::vector<int> cur_rank(static_cast<size_t>(net.columns()), kNoPath);

    struct Incoming {
        LinkSlope slope;
        int offset;  // predecessor column = ix + offset
        int rank;    // Down < Stay < Up
    };
    const Incoming incoming[3] = {{LinkSlope::Down, +1, 0},
                                  {LinkSlope::Stay, 0, 1},
                                  {LinkSlope::Up, -net.theta(), 2}};

    for (int level = 1; level < net.levels(); ++level) {
        auto& row = n[static_cast<size_t>(level)];
        row.assign(static_cast<size_t>(net.columns()),
                   std::numeric_limits<double>::infinity());
        for (int ix = 0; ix < net.columns(); ++ix) {
            double best = std::numeric_limits<double>::infinity();
            int best_rank = kNoPath;
            for (const Incoming& in : incoming) {
                const int pred = ix + in.offset;
                if (pred < 0 || pred >= net.columns()) continue;
                if (!net.has_link(level - 1, pred, in.slope)) continue;
                const double c = n[static_cast<size_t>(level - 1)][static_cast<size_t>(pred)] +
                                 net.cost(level - 1, pred, in.slope);
                const int r = level == 1 ? in.rank : prev_rank[static_cast<size_t>(pred)];
                if (c < best || (c == best && r < best_rank)) {
                    best = c;
                    best_rank = r;
                }
            }
            row[static_cast<size_t>(ix)] = best;
            cur_rank[static_cast<size_t>(ix)] = best_rank;
        }
        std::swap(prev_rank, cur_rank);
    }
    return n;
}

inline double solve_N(const VariationalNet& net, std::span<const double> g0, NodeId p) {
    if (p.level < 0 || p.level >= net.levels() || p.ix < 0 || p.ix >= net.columns())
        detail::invalid_fail("target node", static_cast<double>(p.ix));
    return solve_all(net, g0)[static_cast<size_t>(p.level)][static_cast<size_t>(p.ix)];
}

/// CSV export of a solved surface: one row per node. Values use %.12g.
inline void write_n_surface_csv(const VariationalNet& net,
                                std::span<const std::vector<double>> surface, std::ostream& os) {
    if (surface.size() != static_cast<size_t>(net.levels()))
        detail::invalid_fail("surface level count", static_cast<double>(surface.size()));
    os << "t_hr, x_km, N_veh\n";
    char buf[96];
    for (int level = 0; level < net.levels(); ++level) {
        for (int ix = 0; ix < net.columns(); ++ix) {
            std::snprintf(buf, sizeof buf, "%.12g, %.12g, %.12g\n", net.node_time(level),
                          net.node_x(ix),
                          surface[static_cast<size_t>(level)][static_cast<size_t>(ix)]);
            os << buf;
        }
    }
}

}  // namespace vtflow
