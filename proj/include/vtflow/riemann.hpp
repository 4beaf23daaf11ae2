#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "vtflow/common.hpp"
#include "vtflow/fundamental_diagram.hpp"
#include "vtflow/source.hpp"

namespace vtflow {

// Riemann problem with a source step: initial densities k_up / k_down on
// either side of an interface at x0, plus constant inflow rates a_up / a_down
// on the same half-lines. Solved in variational form: the cumulative count at
// P = (t, x0) is the minimum over observer paths of
//
//     f(B, path) = G(y) + t*Q - (x0 - y)*K + J(path),
//
// where B = (0, y) is the start, G is the initial count, and J is the exact
// integral of the source potential along the path. With piecewise-constant
// rates the minimizing path is piecewise linear with at most one speed
// switch, which leaves three path families per side of the interface: the
// area-maximizing "upper" two-leg path, the area-minimizing "lower" one, and
// the "middle" path that rides the interface. Each family's cost is quadratic
// in y, so the global minimum is found among the three geometric anchors
// (cone corners and interface foot) and the interior vertices of the six
// quadratics.

class RiemannProblem {
public:
    RiemannProblem(TriangularFD fd, double k_up, double k_down, double a_up, double a_down,
                   double x0, double t)
        : fd_(fd),
          k_up_(k_up),
          k_down_(k_down),
          a_up_(a_up),
          a_down_(a_down),
          x0_(x0),
          t_(t),
          source_(StepSource{a_up, a_down, x0}) {
        if (k_up < -kDomainSlack || k_up > fd.kappa() + kDomainSlack)
            detail::invalid_fail("upstream density k_up", k_up);
        if (k_down < -kDomainSlack || k_down > fd.kappa() + kDomainSlack)
            detail::invalid_fail("downstream density k_down", k_down);
        if (!std::isfinite(a_up)) detail::invalid_fail("upstream rate a_up", a_up);
        if (!std::isfinite(a_down)) detail::invalid_fail("downstream rate a_down", a_down);
        if (!(t > 0.0) || !std::isfinite(t)) detail::invalid_fail("horizon t", t);
        k_up_ = std::clamp(k_up_, 0.0, fd.kappa());
        k_down_ = std::clamp(k_down_, 0.0, fd.kappa());
    }

    const TriangularFD& fd() const { return fd_; }
    double k_up() const { return k_up_; }
    double k_down() const { return k_down_; }
    double a_up() const { return a_up_; }
    double a_down() const { return a_down_; }
    double x0() const { return x0_; }
    double t() const { return t_; }

    double x_upstream() const { return x0_ - fd_.u() * t_; }
    double x_downstream() const { return x0_ + fd_.w() * t_; }

    /// Net vehicle count injected upstream of the cone over the horizon;
    /// a bookkeeping constant reported for diagnostics.
    double j0() const { return -a_up_ * x_upstream() * t_; }

    /// Initial cumulative count, normalized to zero at the interface.
    double boundary_count(double y) const {
        return (x0_ - y) * (y <= x0_ ? k_up_ : k_down_);
    }

    /// The inflow field as an exogenous step source (potential referenced
    /// at x = 0, like every potential in the library).
    const ExogenousSource& source() const { return source_; }

private:
    TriangularFD fd_;
    double k_up_, k_down_;
    double a_up_, a_down_;
    double x0_;
    double t_;
    ExogenousSource source_;
};

/// Source cost J of the six path families evaluated at a start point y.
/// Index 0..2: upper/lower/middle family on the downstream side (y >= x0),
/// index 3..5: the same three families on the upstream side (y <= x0).
/// Families on the far side of y are NaN; at y = x0 both sides are filled
/// and coincide pairwise.
inline std::array<double, 6> path_family_costs(const RiemannProblem& p, double y) {
    const TriangularFD& fd = p.fd();
    const double t = p.t();
    const double x0 = p.x0();
    const double x_up = p.x_upstream();
    const double x_down = p.x_downstream();
    const double sigma = fd.u() + fd.w();
    const double slack = kDomainSlack * std::max(1.0, x_down - x_up);
    if (y < x_up - slack || y > x_down + slack) detail::domain_fail("path start y", y);
    y = std::clamp(y, x_up, x_down);

    const ExogenousSource& src = p.source();
    auto leg = [&](double t0, double xa, double t1, double xb) {
        return integral_of_potential_along_chord(src, t0, xa, t1, xb);
    };
    auto upper = [&] {
        const double tau = std::clamp((x_down - y) / sigma, 0.0, t);
        const double apex = y + fd.u() * tau;
        return leg(0.0, y, tau, apex) + leg(tau, apex, t, x0);
    };
    auto lower = [&] {
        const double tau_rise = std::clamp((x_down - y) / sigma, 0.0, t);
        const double tau_fall = t - tau_rise;
        const double bottom = y - fd.w() * tau_fall;
        return leg(0.0, y, tau_fall, bottom) + leg(tau_fall, bottom, t, x0);
    };
    auto middle = [&] {
        const double tau = std::clamp(y >= x0 ? (y - x0) / fd.w() : (x0 - y) / fd.u(), 0.0, t);
        return leg(0.0, y, tau, x0) + leg(tau, x0, t, x0);
    };

    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    std::array<double, 6> j{nan, nan, nan, nan, nan, nan};
    if (y >= x0) {
        j[0] = upper();
        j[1] = lower();
        j[2] = middle();
    }
    if (y <= x0) {
        j[3] = upper();
        j[4] = lower();
        j[5] = middle();
    }
    return j;
}

/// Count value f(y) = G(y) + t*Q - (x0-y)*K + J(y), with J the cheapest
/// family on y's side of the interface.
inline double count_at_start(const RiemannProblem& p, double y) {
    const auto j = path_family_costs(p, y);
    double best_j = std::numeric_limits<double>::infinity();
    for (double v : j)
        if (!std::isnan(v)) best_j = std::min(best_j, v);
    return p.boundary_count(y) + p.t() * p.fd().capacity() -
           (p.x0() - y) * p.fd().critical_density() + best_j;
}

/// Interior stationary point of one path-family cost. The family cost is
/// alpha + beta*d + gamma*d^2 in the offset d = y - x0; a family with
/// gamma = 0 is linear and has no interior extremum.
struct InteriorCandidate {
    double y = 0.0;
    bool valid = false;
    double gamma = 0.0;
    double beta = 0.0;
};

/// Stationary points of the six families. Valid means: non-degenerate
/// quadratic and strictly inside the family's window, (x0, x_down) for the
/// downstream families (index 0..2), (x_up, x0) for the upstream ones.
inline std::array<InteriorCandidate, 6> interior_candidates(const RiemannProblem& p) {
    const TriangularFD& fd = p.fd();
    const double u = fd.u(), w = fd.w(), sigma = u + w;
    const double t = p.t();
    const double K = fd.critical_density();
    const double au = p.a_up(), ad = p.a_down();
    const double dku = p.k_up() - K;
    const double dkd = p.k_down() - K;

    std::array<InteriorCandidate, 6> out;
    const double gamma[6] = {ad / (2.0 * sigma),
                             (au * u / sigma - ad) / (2.0 * w),
                             -ad / (2.0 * w),
                             (au - ad * w / sigma) / (2.0 * u),
                             -au / (2.0 * sigma),
                             au / (2.0 * u)};
    const double beta[6] = {-dkd - ad * w * t / sigma,
                            -dkd - au * u * t / sigma,
                            -dkd,
                            -dku - ad * w * t / sigma,
                            -dku - au * u * t / sigma,
                            -dku};
    for (int i = 0; i < 6; ++i) {
        out[i].gamma = gamma[i];
        out[i].beta = beta[i];
        if (gamma[i] == 0.0) continue;
        const double d = -beta[i] / (2.0 * gamma[i]);
        out[i].y = p.x0() + d;
        const bool downstream_side = i < 3;
        if (downstream_side)
            out[i].valid = out[i].y > p.x0() && out[i].y < p.x_downstream();
        else
            out[i].valid = out[i].y > p.x_upstream() && out[i].y < p.x0();
    }
    return out;
}

struct RiemannCandidateRow {
    std::string label;
    double y = 0.0;
    double f = std::numeric_limits<double>::quiet_NaN();
    bool valid = false;
};

struct RiemannSolution {
    double n = 0.0;           // minimal count at (t, x0), veh
    double q_raw = 0.0;       // average flow before clamping, veh/h
    double q = 0.0;           // average flow clamped to [0, Q], veh/h
    bool clamped = false;
    std::string argmin;       // label of the winning candidate
    std::vector<RiemannCandidateRow> candidates;
};

/// Full solve: evaluates the three anchors and every valid interior
/// candidate, takes the minimum (first listed wins ties), and converts the
/// count into the average interface flow
///
///     q = N/t - Phi(x0),
///
/// the time average of N_t - Phi at the interface; Phi is constant in time
/// here so the average is just -Phi(x0). The flow is clamped to [0, Q] and
/// the clamping is flagged.
inline RiemannSolution solve(const RiemannProblem& p) {
    RiemannSolution sol;
    sol.candidates.reserve(9);
    auto push = [&](std::string label, double y, bool valid) {
        RiemannCandidateRow row;
        row.label = std::move(label);
        row.y = y;
        row.valid = valid;
        if (valid) row.f = count_at_start(p, y);
        sol.candidates.push_back(std::move(row));
    };
    push("x_up", p.x_upstream(), true);
    push("x0", p.x0(), true);
    push("x_down", p.x_downstream(), true);
    const auto ics = interior_candidates(p);
    for (int i = 0; i < 6; ++i) push("y" + std::to_string(i + 1), ics[i].y, ics[i].valid);

    double best = std::numeric_limits<double>::infinity();
    for (const auto& row : sol.candidates) {
        if (!row.valid) continue;
        if (row.f < best) {
            best = row.f;
            sol.argmin = row.label;
        }
    }
    sol.n = best;

    const double q_cap = p.fd().capacity();
    sol.q_raw = sol.n / p.t() - p.source().potential(0.0, p.x0());
    sol.q = std::clamp(sol.q_raw, 0.0, q_cap);
    const double tol = 1e-12 * std::max(1.0, q_cap);
    sol.clamped = sol.q_raw < -tol || sol.q_raw > q_cap + tol;
    return sol;
}

/// Average flow over (0, t) across the interface, clamped to [0, Q].
inline double average_flow(const RiemannProblem& p) { return solve(p).q; }

}  // namespace vtflow
