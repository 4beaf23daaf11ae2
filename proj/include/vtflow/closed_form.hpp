#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "vtflow/common.hpp"
#include "vtflow/fundamental_diagram.hpp"

namespace vtflow {

/// Infinite-corridor problem with uniform initial density k0 and a constant
/// inflow rate a (veh/(km h)) applied everywhere. Everything about it is
/// available in closed form, which makes it the reference case the numerical
/// modules are audited against.
class ConstantIVP {
public:
    ConstantIVP(TriangularFD fd, double k0, double a) : fd_(fd), k0_(k0), a_(a) {
        if (k0 < -kDomainSlack || k0 > fd.kappa() + kDomainSlack)
            detail::invalid_fail("initial density k0", k0);
        if (!std::isfinite(a)) detail::invalid_fail("inflow rate a", a);
        k0_ = std::clamp(k0, 0.0, fd.kappa());
    }

    const TriangularFD& fd() const { return fd_; }
    double k0() const { return k0_; }
    double a() const { return a_; }

    /// Density at time t, clipped to the physical range: the uniform state
    /// k0 + a*t stops changing once it drains to 0 or fills to kappa.
    double density_at(double t) const {
        if (t < -kDomainSlack) detail::domain_fail("time t", t);
        return std::clamp(k0_ + a_ * std::max(t, 0.0), 0.0, fd_.kappa());
    }

    /// Time at which the uniform state crosses the critical density, when it
    /// does: (K - k0)/a if the inflow drives k0 toward K, 0 if k0 is already
    /// critical, absent otherwise.
    std::optional<double> time_to_capacity() const {
        const double gap = fd_.critical_density() - k0_;
        if (gap == 0.0) return 0.0;
        if (a_ == 0.0) return std::nullopt;
        const double t = gap / a_;
        if (t > 0.0) return t;
        return std::nullopt;
    }

private:
    TriangularFD fd_;
    double k0_;
    double a_;
};

/// Signed area between the x-axis and the extreme observer path from (0, y)
/// to (t, x): the path that first runs toward the corner x_m and then returns
/// at the opposite bound speed. sign_a = +1 selects the area-maximizing path
/// (corner at x + w*t), -1 the minimizing one (corner at x - u*t).
///
///     A = [(x + x_m)*t - sign_a*(x_m - y)^2/(u + w)] / 2
inline double extremal_area(const TriangularFD& fd, double y, double x, double t, int sign_a) {
    if (!(t > 0.0)) detail::domain_fail("time t", t);
    if (sign_a != 1 && sign_a != -1) detail::invalid_fail("sign_a", sign_a);
    const double x_up = x - fd.u() * t;
    const double x_down = x + fd.w() * t;
    const double slack = kDomainSlack * std::max(1.0, x_down - x_up);
    if (y < x_up - slack || y > x_down + slack) detail::domain_fail("path start y", y);
    const double x_m = sign_a > 0 ? x_down : x_up;
    const double d = x_m - y;
    return 0.5 * ((x + x_m) * t - sign_a * d * d / (fd.u() + fd.w()));
}

/// Cumulative count N(t,x) for the uniform-inflow problem, normalized so
/// that N(0,x) = -k0*x. Minimizes over observer paths: candidate starts are
/// the two cone endpoints and, once t passes the capacity-crossing time, the
/// interior stationary point y* = x_m - (K - k0)*(u+w)/|a|.
inline double n_value(const ConstantIVP& p, double t, double x) {
    const TriangularFD& fd = p.fd();
    if (t < 0.0) detail::domain_fail("time t", t);
    if (t == 0.0) return -p.k0() * x;
    const double K = fd.critical_density();
    const double Q = fd.capacity();
    const double x_up = x - fd.u() * t;
    const double x_down = x + fd.w() * t;

    if (p.a() == 0.0) {
        auto f = [&](double y) { return -p.k0() * y + t * Q - (x - y) * K; };
        return std::min(f(x_up), f(x_down));
    }

    const int sign_a = p.a() > 0.0 ? 1 : -1;
    auto f = [&](double y) {
        return -p.k0() * y + t * Q - (x - y) * K - p.a() * extremal_area(fd, y, x, t, sign_a);
    };

    const double psi = std::abs(p.a()) / (fd.u() + fd.w());
    const double x_m = sign_a > 0 ? x_down : x_up;
    const double y_star = x_m - (K - p.k0()) / psi;
    const auto ttc = p.time_to_capacity();
    const double slack = kDomainSlack * std::max(1.0, x_down - x_up);
    if (ttc && t >= *ttc && y_star >= x_up - slack && y_star <= x_down + slack)
        return f(std::clamp(y_star, x_up, x_down));
    return std::min(f(x_up), f(x_down));
}

/// Which data feed the solution at (t, x) on a corridor [xi, chi]: both
/// characteristic cone corners may land on the initial line (region I), the
/// upstream entry (II), the downstream exit (III), or both boundaries (IV).
enum class IbvpRegion { I, II, III, IV };

struct IbvpAnchors {
    IbvpRegion region;
    double t_up, x_up;      // upstream corner of the dependence cone
    double t_down, x_down;  // downstream corner
};

inline IbvpAnchors ibvp_region(const TriangularFD& fd, double xi, double chi, double t, double x) {
    if (!(xi < chi)) detail::invalid_fail("corridor entry xi (must precede chi)", xi);
    if (t < 0.0) detail::domain_fail("time t", t);
    const double slack = kDomainSlack * std::max(1.0, chi - xi);
    if (x < xi - slack || x > chi + slack) detail::domain_fail("position x", x);

    IbvpAnchors out{};
    const bool up_initial = x - fd.u() * t >= xi;
    const bool down_initial = x + fd.w() * t <= chi;
    if (up_initial) {
        out.t_up = 0.0;
        out.x_up = x - fd.u() * t;
    } else {
        out.t_up = t - (x - xi) / fd.u();
        out.x_up = xi;
    }
    if (down_initial) {
        out.t_down = 0.0;
        out.x_down = x + fd.w() * t;
    } else {
        out.t_down = t - (chi - x) / fd.w();
        out.x_down = chi;
    }
    out.region = up_initial ? (down_initial ? IbvpRegion::I : IbvpRegion::III)
                            : (down_initial ? IbvpRegion::II : IbvpRegion::IV);
    return out;
}

}  // namespace vtflow
