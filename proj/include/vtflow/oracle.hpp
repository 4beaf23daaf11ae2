#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "vtflow/closed_form.hpp"
#include "vtflow/common.hpp"
#include "vtflow/riemann.hpp"

namespace vtflow {

/// Resolution of the brute-force path search.
///
/// Paths live on a time lattice with n_steps levels. Between levels a path
/// moves at one of n_speeds evenly spaced chord speeds spanning [-w, u]
/// (the two extremes are members by construction), or hops onto a dedicated
/// seam state that pins the path to the interface, where it can dwell at
/// exactly zero speed. The potential along every segment is integrated with
/// the midpoint rule over phi_samples sub-intervals.
struct LatticeDPConfig {
    int n_steps = 200;
    int n_speeds = 9;
    int phi_samples = 8;
};

/// Brute-force value plus the accuracy budget it is good for. The budget
/// covers start-position quantization, segment-boundary quantization of the
/// optimal switch times, and the midpoint integration of the potential; the
/// passing-rate part of the cost is linear in speed and integrates exactly.
struct OracleResult {
    double n = 0.0;          // veh
    double tolerance = 0.0;  // veh
};

namespace detail {

/// Backward dynamic program over piecewise-constant-speed paths ending at
/// (t, x). The level-m grid covers the dependence cone [x - u*m*tau,
/// x + w*m*tau] with pitch sigma*tau/(n_speeds-1), so both extreme speeds
/// map to exact index shifts. `seam` is the one position a path may hold
/// exactly (the potential kink); `phi` is the time-constant potential,
/// `g` the initial count. a_bound bounds |phi'|, a_jump its kink jump.
template <class Potential, class Boundary>
OracleResult oracle_dp(const TriangularFD& fd, double t, double x, double seam,
                       double a_bound, double a_jump, Potential&& phi, Boundary&& g,
                       const LatticeDPConfig& cfg) {
    if (cfg.n_steps < 2) detail::invalid_fail("lattice steps", cfg.n_steps);
    if (cfg.n_speeds < 2) detail::invalid_fail("speed samples", cfg.n_speeds);
    if (cfg.phi_samples < 1) detail::invalid_fail("potential samples", cfg.phi_samples);
    if (!(t > 0.0)) detail::domain_fail("horizon t", t);

    const double u = fd.u(), w = fd.w(), sigma = u + w;
    const int n = cfg.n_steps;
    const int m_pitch = cfg.n_speeds - 1;
    const double tau = t / n;
    const double h = sigma * tau / m_pitch;
    const double eps_v = kDomainSlack * sigma;
    constexpr double kInf = std::numeric_limits<double>::infinity();

    // One step from x_from at chord speed v: exact passing count plus the
    // midpoint sum of the potential along the chord.
    auto seg_cost = [&](double x_from, double v) {
        double j = 0.0;
        const double dxs = v * tau / cfg.phi_samples;
        for (int s = 0; s < cfg.phi_samples; ++s) j += phi(x_from + (s + 0.5) * dxs);
        return fd.passing_rate(std::clamp(v, -w, u)) * tau + j * tau / cfg.phi_samples;
    };

    std::vector<double> speed(static_cast<size_t>(m_pitch) + 1);
    for (int d = 0; d <= m_pitch; ++d) speed[static_cast<size_t>(d)] = u - d * sigma / m_pitch;

    std::vector<double> cur{0.0};  // level 0: the end point itself
    double cs = 0.0;               // seam coincides with x in every use here
    for (int m = 0; m < n; ++m) {
        const int sz_to = m * m_pitch + 1;
        const int sz_from = (m + 1) * m_pitch + 1;
        const double base_to = x - u * m * tau;
        const double base_from = x - u * (m + 1) * tau;

        std::vector<double> nxt(static_cast<size_t>(sz_from), kInf);
        for (int ip = 0; ip < sz_from; ++ip) {
            const double from = base_from + ip * h;
            double best = kInf;
            const int lo = std::max(0, ip - m_pitch), hi = std::min(sz_to - 1, ip);
            for (int i = lo; i <= hi; ++i)
                best = std::min(best, seg_cost(from, speed[static_cast<size_t>(ip - i)]) +
                                          cur[static_cast<size_t>(i)]);
            const double vs = (seam - from) / tau;
            if (vs >= -w - eps_v && vs <= u + eps_v)
                best = std::min(best, seg_cost(from, vs) + cs);
            nxt[static_cast<size_t>(ip)] = best;
        }

        double cbest = cs + fd.capacity() * tau + phi(seam) * tau;  // dwell at the seam
        for (int i = 0; i < sz_to; ++i) {
            const double vs = (base_to + i * h - seam) / tau;
            if (vs < -w - eps_v || vs > u + eps_v) continue;
            cbest = std::min(cbest, seg_cost(seam, vs) + cur[static_cast<size_t>(i)]);
        }
        cur = std::move(nxt);
        cs = cbest;
    }

    OracleResult out;
    out.n = g(seam) + cs;
    const double base = x - u * t;
    for (size_t i = 0; i < cur.size(); ++i)
        out.n = std::min(out.n, g(base + static_cast<double>(i) * h) + cur[i]);

    const double tol_y = a_bound / std::min(u, w) * h * h / 4.0;
    const double tol_switch = 4.0 * a_bound * sigma * tau * tau;
    const double lx = sigma * tau / cfg.phi_samples;
    const double tol_phi = n * a_jump * lx * lx / 8.0;
    out.tolerance = tol_y + tol_switch + tol_phi;
    return out;
}

}  // namespace detail

/// Count at the interface of a two-sided problem by exhaustive path search,
/// independent of the candidate algebra in the exact solver.
inline OracleResult brute_force_N(const RiemannProblem& p, const LatticeDPConfig& cfg = {}) {
    const double au = p.a_up(), ad = p.a_down(), x0 = p.x0();
    auto phi = [au, ad, x0](double xx) {
        return -(au * (std::min(xx, x0) - std::min(0.0, x0)) +
                 ad * (std::max(xx, x0) - std::max(0.0, x0)));
    };
    auto g = [&p](double y) { return p.boundary_count(y); };
    return detail::oracle_dp(p.fd(), p.t(), x0, x0, std::max(std::abs(au), std::abs(ad)),
                             std::abs(au - ad), phi, g, cfg);
}

/// Count at (t, x) for the uniform-inflow problem by exhaustive path search.
/// The potential has no kink, so the dedicated seam state merely pins the
/// stationary speed at the query point.
inline OracleResult brute_force_N(const ConstantIVP& ivp, double t, double x,
                                  const LatticeDPConfig& cfg = {}) {
    const double a = ivp.a(), k0 = ivp.k0();
    auto phi = [a](double xx) { return -a * xx; };
    auto g = [k0](double y) { return -k0 * y; };
    return detail::oracle_dp(ivp.fd(), t, x, x, std::abs(a), 0.0, phi, g, cfg);
}

/// Dense sweep of the start-point cost over the dependence cone. The cost
/// is piecewise quadratic, so the sweep minimum can undershoot the exact
/// candidate minimum by at most max|gamma|*(cell/2)^2; that bound is
/// reported so the sweep can serve as an independent check.
struct DenseScan {
    std::vector<double> y;
    std::vector<double> f;
    double min_f = std::numeric_limits<double>::infinity();
    double min_y = 0.0;
    double vertex_bound = 0.0;
};

inline DenseScan dense_y_scan(const RiemannProblem& p, int n_samples) {
    if (n_samples < 3) detail::invalid_fail("scan samples", n_samples);
    DenseScan out;
    out.y.reserve(static_cast<size_t>(n_samples));
    out.f.reserve(static_cast<size_t>(n_samples));
    const double xu = p.x_upstream(), xd = p.x_downstream();
    const double cell = (xd - xu) / (n_samples - 1);
    for (int i = 0; i < n_samples; ++i) {
        const double y = i + 1 == n_samples ? xd : xu + i * cell;
        const double f = count_at_start(p, y);
        out.y.push_back(y);
        out.f.push_back(f);
        if (f < out.min_f) {
            out.min_f = f;
            out.min_y = y;
        }
    }
    double gmax = 0.0;
    for (const InteriorCandidate& ic : interior_candidates(p))
        gmax = std::max(gmax, std::abs(ic.gamma));
    out.vertex_bound = gmax * cell * cell / 4.0;
    return out;
}

}  // namespace vtflow
