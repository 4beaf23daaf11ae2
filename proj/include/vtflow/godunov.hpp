#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vtflow/common.hpp"
#include "vtflow/fundamental_diagram.hpp"
#include "vtflow/grid.hpp"
#include "vtflow/riemann.hpp"
#include "vtflow/source.hpp"

namespace vtflow {

// Explicit finite-volume scheme for k_t + H(k)_x = phi on a corridor grid
// with dx = u*dt. Source terms are frozen per step (endogenous rates are
// evaluated at the previous state), so within a step every interface sees
// piecewise-constant data and the two flux rules below apply.

enum class FluxRule {
    CT,   // min{Q, u*k_up, w*(kappa - k_down)}; sources ignored at the interface
    ERP,  // average flow of the interface Riemann problem, sources included
};

/// Ghost-cell treatment at the corridor ends.
/// Open: empty ghosts with zero inflow. Upstream this means zero demand;
/// downstream the empty ghost's supply w*kappa exceeds Q, so outflow is
/// unconstrained.
/// Mirror: ghosts replicate the adjacent edge cell's density and inflow,
/// which keeps a uniform state exactly uniform (interface fluxes telescope).
enum class BoundaryMode { Open, Mirror };

inline double ct_flux(const TriangularFD& fd, double k_up, double k_down) {
    if (k_up < -kDomainSlack || k_up > fd.kappa() + kDomainSlack)
        detail::domain_fail("upstream density k_up", k_up);
    if (k_down < -kDomainSlack || k_down > fd.kappa() + kDomainSlack)
        detail::domain_fail("downstream density k_down", k_down);
    k_up = std::clamp(k_up, 0.0, fd.kappa());
    k_down = std::clamp(k_down, 0.0, fd.kappa());
    return std::min({fd.capacity(), fd.u() * k_up, fd.w() * (fd.kappa() - k_down)});
}

/// Godunov flux from the interface Riemann problem with the adjacent frozen
/// inflow rates, averaged over one step. The average flow is invariant under
/// translation of the interface, so the problem is solved at the origin.
inline double erp_flux(const TriangularFD& fd, double k_up, double k_down, double a_up,
                       double a_down, double dt) {
    return average_flow(RiemannProblem(fd, k_up, k_down, a_up, a_down, 0.0, dt));
}

/// One conservative update plus its audit trail. q[i] is the flux across
/// interface i (upstream of cell i) averaged over the step; mass_residual is
/// the pre-clamp conservation defect sum(k' - k)*dx - dt*(q_in - q_out)
/// - dt*sum(phi)*dx, which is zero up to roundoff; clamp_count is the number
/// of cells whose updated density left [0, kappa] and was clipped.
struct StepResult {
    GridState state;
    std::vector<double> q;
    double mass_residual = 0.0;
    int clamp_count = 0;
};

inline StepResult step(const GridState& s, const ExogenousSource& src_frozen, FluxRule rule,
                       const TriangularFD& fd, BoundaryMode bc = BoundaryMode::Open) {
    const GridSpec& g = s.spec;
    const int n = g.n_cells;
    if (n < 1 || static_cast<size_t>(n) != s.k.size())
        detail::invalid_fail("cell count", static_cast<double>(s.k.size()));
    // dx = u*dt keeps the free-flow CFL number at exactly one.
    if (std::abs(g.dx - fd.u() * g.dt) > kDomainSlack * std::max(1.0, g.dx))
        detail::invalid_fail("dx/(u*dt)", g.dx / (fd.u() * g.dt));

    std::vector<double> phi(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        phi[static_cast<size_t>(i)] = src_frozen.rate(s.t, g.cell_center(i));

    const bool mirror = bc == BoundaryMode::Mirror;
    const double k_ghost_up = mirror ? s.k.front() : 0.0;
    const double k_ghost_down = mirror ? s.k.back() : 0.0;
    const double a_ghost_up = mirror ? phi.front() : 0.0;
    const double a_ghost_down = mirror ? phi.back() : 0.0;

    auto flux = [&](double ku, double kd, double au, double ad) {
        return rule == FluxRule::CT ? ct_flux(fd, ku, kd) : erp_flux(fd, ku, kd, au, ad, g.dt);
    };
    std::vector<double> q(static_cast<size_t>(n) + 1);
    q.front() = flux(k_ghost_up, s.k.front(), a_ghost_up, phi.front());
    for (int i = 1; i < n; ++i)
        q[static_cast<size_t>(i)] = flux(s.k[static_cast<size_t>(i - 1)],
                                         s.k[static_cast<size_t>(i)],
                                         phi[static_cast<size_t>(i - 1)],
                                         phi[static_cast<size_t>(i)]);
    q.back() = flux(s.k.back(), k_ghost_down, phi.back(), a_ghost_down);

    StepResult out;
    out.state.step = s.step + 1;
    out.state.t = s.t + g.dt;
    out.state.spec = g;
    out.state.k.resize(static_cast<size_t>(n));
    const double r = g.dt / g.dx;
    double balance = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<size_t>(i);
        const double raw = s.k[ui] + r * (q[ui] - q[ui + 1]) + g.dt * phi[ui];
        balance += (raw - s.k[ui]) * g.dx - g.dt * phi[ui] * g.dx;
        const double clipped = std::clamp(raw, 0.0, fd.kappa());
        if (clipped != raw) ++out.clamp_count;
        out.state.k[ui] = clipped;
    }
    out.mass_residual = balance - g.dt * (q.front() - q.back());
    out.q = std::move(q);
    return out;
}

/// Inflow model for a run: either a fixed exogenous field or an endogenous
/// rate that is re-frozen against the current densities before every step.
using SourceModel = std::variant<ExogenousSource, EndogenousSource>;

struct RunResult {
    std::vector<GridState> states;            // m + 1 entries, initial state first
    std::vector<std::vector<double>> fluxes;  // m entries of n + 1 interface flows
    std::vector<double> residuals;            // pre-clamp mass defect per step, veh
    std::vector<int> clamp_counts;            // clipped cells per step
    int total_clamps = 0;
};

inline RunResult run(const GridSpec& g, const TriangularFD& fd, std::vector<double> k0,
                     const SourceModel& source, FluxRule rule, double horizon_hr,
                     BoundaryMode bc = BoundaryMode::Open) {
    if (g.n_cells < 1 || k0.size() != static_cast<size_t>(g.n_cells))
        detail::invalid_fail("initial density count", static_cast<double>(k0.size()));
    for (double& k : k0) {
        if (k < -kDomainSlack || k > fd.kappa() + kDomainSlack)
            detail::invalid_fail("initial density", k);
        k = std::clamp(k, 0.0, fd.kappa());
    }
    if (!(horizon_hr >= 0.0) || !std::isfinite(horizon_hr))
        detail::invalid_fail("horizon_hr", horizon_hr);
    const double steps = horizon_hr / g.dt;
    const double rounded = std::round(steps);
    if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps))
        detail::invalid_fail("horizon/dt, must be a whole number of steps", steps);
    const int m = static_cast<int>(rounded);

    RunResult out;
    out.states.reserve(static_cast<size_t>(m) + 1);
    out.states.push_back(GridState{0, 0.0, g, std::move(k0)});
    for (int j = 0; j < m; ++j) {
        const GridState& s = out.states.back();
        StepResult sr = std::visit(
            [&](const auto& src) {
                using T = std::decay_t<decltype(src)>;
                if constexpr (std::is_same_v<T, ExogenousSource>)
                    return step(s, src, rule, fd, bc);
                else
                    return step(s, ExogenousSource(src.freeze(fd, g, s.k)), rule, fd, bc);
            },
            source);
        out.fluxes.push_back(std::move(sr.q));
        out.residuals.push_back(sr.mass_residual);
        out.clamp_counts.push_back(sr.clamp_count);
        out.total_clamps += sr.clamp_count;
        out.states.push_back(std::move(sr.state));
    }
    return out;
}

// On-ramp corridor benchmark: an initially empty road of length L fed by
// phi = a*x - b*u*k. While every density stays below K the exact profile is
//
//     k(t,x) = a/(b^2 u) * (b x - 1 + (1 - b (x - t u)) e^{-b t u}),
//
// the free-flow solution carried along characteristics from the empty
// initial condition.

class MergeExample {
public:
    MergeExample(const TriangularFD& fd, double a, double b, double length)
        : fd_(fd), a_(a), b_(b), length_(length) {
        if (!(a > 0.0) || !std::isfinite(a)) detail::invalid_fail("inflow slope a", a);
        if (!(b > 0.0) || !std::isfinite(b)) detail::invalid_fail("feedback gain b", b);
        if (!(length > 0.0) || !std::isfinite(length))
            detail::invalid_fail("road length", length);
    }

    const TriangularFD& fd() const { return fd_; }
    double a() const { return a_; }
    double b() const { return b_; }
    double length() const { return length_; }

    EndogenousSource source() const { return EndogenousSource(MergeFeedback{a_, b_}); }

private:
    TriangularFD fd_;
    double a_, b_;
    double length_;
};

/// The benchmark instance used throughout: u = w = 100 km/h, kappa = 150
/// veh/km, L = 20 km, a = 0.5*Q/L, b = 0.3/km.
inline MergeExample reference_merge_example() {
    const TriangularFD fd(100.0, 100.0, 150.0);
    return MergeExample(fd, 0.5 * fd.capacity() / 20.0, 0.3, 20.0);
}

struct MergeDensity {
    double k = 0.0;
    bool in_regime = false;  // false once the profile exceeds K at or upstream of x
};

inline MergeDensity exact_merge_density(const MergeExample& ex, double t, double x) {
    if (t < -kDomainSlack) detail::domain_fail("time t", t);
    if (x < -kDomainSlack * std::max(1.0, ex.length()) ||
        x > ex.length() * (1.0 + kDomainSlack))
        detail::domain_fail("position x", x);
    t = std::max(t, 0.0);
    x = std::clamp(x, 0.0, ex.length());
    const double u = ex.fd().u(), b = ex.b();
    const double z = b * t * u;
    const double scale = ex.a() / (b * b * u);
    MergeDensity out;
    out.k = scale * (b * x - 1.0 + (1.0 - b * (x - t * u)) * std::exp(-z));
    // d k / d x = a/(b u) (1 - e^{-b t u}) >= 0, so the profile is
    // nondecreasing in x and the regime check at x covers everything upstream.
    const double K = ex.fd().critical_density();
    out.in_regime = out.k <= K + kDomainSlack * std::max(1.0, K);
    return out;
}

/// First time the exact profile reaches the critical density anywhere on the
/// road. dk/dt = a (x - t u) e^{-b t u}, so at fixed x the profile rises
/// until t = x/u and the road-wide first crossing happens at x = L within
/// [0, L/u]; bisection on that increasing segment.
inline double merge_regime_end(const MergeExample& ex) {
    const double K = ex.fd().critical_density();
    const double L = ex.length();
    double lo = 0.0, hi = L / ex.fd().u();
    if (exact_merge_density(ex, hi, L).k < K)
        detail::invalid_fail("peak exact density, never reaches K", exact_merge_density(ex, hi, L).k);
    while (hi - lo > 1e-12 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        (exact_merge_density(ex, mid, L).k < K ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

namespace detail {
inline int nearest_cell(const GridSpec& g, double x) {
    const double slack = kDomainSlack * std::max(1.0, g.length());
    if (x < g.x_origin - slack || x > g.x_origin + g.length() + slack)
        domain_fail("probe position x", x);
    const auto i = static_cast<int>(std::floor((x - g.x_origin) / g.dx));
    return std::clamp(i, 0, g.n_cells - 1);
}
}  // namespace detail

/// Density RMSE of a recorded run against the exact ramp-up profile, over
/// every recorded state with t <= t_star. probe_x restricts sampling to the
/// cell whose center is nearest to it; by default every cell is sampled.
/// t_star must lie within the run horizon and within the exact profile's
/// validity window.
inline double rmse(const RunResult& r, const MergeExample& ex, double t_star,
                   std::optional<double> probe_x = std::nullopt) {
    if (r.states.empty()) detail::invalid_fail("recorded state count", 0.0);
    const GridSpec& g = r.states.front().spec;
    const double t_end = r.states.back().t;
    if (!(t_star >= 0.0) || t_star > t_end * (1.0 + kDomainSlack))
        detail::invalid_fail("t_star, outside the run horizon", t_star);
    const double regime_end = merge_regime_end(ex);
    if (t_star > regime_end * (1.0 + kDomainSlack)) {
        char msg[128];
        std::snprintf(msg, sizeof msg,
                      "t_star, exact profile leaves its regime at t = %.9g h", regime_end);
        detail::invalid_fail(msg, t_star);
    }
    int i_lo = 0, i_hi = g.n_cells;
    if (probe_x) {
        i_lo = detail::nearest_cell(g, *probe_x);
        i_hi = i_lo + 1;
    }
    double sq = 0.0;
    long samples = 0;
    for (const GridState& s : r.states) {
        if (s.t > t_star * (1.0 + kDomainSlack) + kDomainSlack) break;
        for (int i = i_lo; i < i_hi; ++i) {
            const double e =
                s.k[static_cast<size_t>(i)] - exact_merge_density(ex, s.t, g.cell_center(i)).k;
            sq += e * e;
            ++samples;
        }
    }
    if (samples == 0) detail::invalid_fail("sample count", 0.0);
    return std::sqrt(sq / static_cast<double>(samples));
}

struct ConvergenceRow {
    double dt_s = 0.0;
    double rmse_ct = 0.0;
    double rmse_erp = 0.0;
    double ratio = 0.0;  // rmse_ct / rmse_erp
};

/// Runs the benchmark with both flux rules for each step size and reports
/// the RMSE against the exact profile up to its regime end. Each run's
/// horizon is the smallest whole number of steps covering the regime.
inline std::vector<ConvergenceRow> convergence_sweep(const MergeExample& ex,
                                                     std::span<const double> dt_seconds,
                                                     std::optional<double> probe_x = std::nullopt) {
    const double t_star = merge_regime_end(ex);
    std::vector<ConvergenceRow> rows;
    rows.reserve(dt_seconds.size());
    for (double dt_s : dt_seconds) {
        if (!(dt_s > 0.0) || !std::isfinite(dt_s)) detail::invalid_fail("dt_s", dt_s);
        const double dt_hr = dt_s / 3600.0;
        const GridSpec g = make_grid(ex.fd(), dt_hr, ex.length());
        const double horizon = std::ceil(t_star / dt_hr - 1e-9) * dt_hr;
        const SourceModel src = ex.source();
        const std::vector<double> empty(static_cast<size_t>(g.n_cells), 0.0);
        const RunResult ct = run(g, ex.fd(), empty, src, FluxRule::CT, horizon);
        const RunResult erp = run(g, ex.fd(), empty, src, FluxRule::ERP, horizon);
        ConvergenceRow row;
        row.dt_s = dt_s;
        row.rmse_ct = rmse(ct, ex, t_star, probe_x);
        row.rmse_erp = rmse(erp, ex, t_star, probe_x);
        row.ratio = row.rmse_ct / row.rmse_erp;
        rows.push_back(row);
    }
    return rows;
}

// CSV exchange. Numbers use %.12g; headers are part of the contract.

/// One row per recorded state and cell: time, cell center, density, and the
/// flux across the cell's upstream interface during the step starting at
/// t_hr. The terminal state repeats the last step's fluxes so the table
/// stays rectangular; a zero-step run reports zero flux.
inline void write_run_csv(const RunResult& r, std::ostream& os,
                          std::optional<double> probe_x = std::nullopt) {
    if (r.states.empty()) detail::invalid_fail("recorded state count", 0.0);
    os << "t_hr, x_km, k_veh_per_km, q_veh_per_hr\n";
    const GridSpec& g = r.states.front().spec;
    int i_lo = 0, i_hi = g.n_cells;
    if (probe_x) {
        i_lo = detail::nearest_cell(g, *probe_x);
        i_hi = i_lo + 1;
    }
    char buf[128];
    for (size_t j = 0; j < r.states.size(); ++j) {
        const GridState& s = r.states[j];
        const std::vector<double>* q = nullptr;
        if (!r.fluxes.empty()) q = j < r.fluxes.size() ? &r.fluxes[j] : &r.fluxes.back();
        for (int i = i_lo; i < i_hi; ++i) {
            const double qi = q ? (*q)[static_cast<size_t>(i)] : 0.0;
            std::snprintf(buf, sizeof buf, "%.12g, %.12g, %.12g, %.12g\n", s.t,
                          g.cell_center(i), s.k[static_cast<size_t>(i)], qi);
            os << buf;
        }
    }
}

inline void write_convergence_csv(std::span<const ConvergenceRow> rows, std::ostream& os) {
    os << "dt_s, rmse_ct, rmse_erp, ratio\n";
    char buf[128];
    for (const ConvergenceRow& row : rows) {
        std::snprintf(buf, sizeof buf, "%.12g, %.12g, %.12g, %.12g\n", row.dt_s, row.rmse_ct,
                      row.rmse_erp, row.ratio);
        os << buf;
    }
}

}  // namespace vtflow
