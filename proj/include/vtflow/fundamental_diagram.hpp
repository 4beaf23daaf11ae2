#pragma once

#include <algorithm>
#include <cmath>

#include "vtflow/common.hpp"

namespace vtflow {

/// Triangular flow-density relation for the kinematic wave model.
///
/// H(k) = min(u*k, w*(kappa - k)) on [0, kappa], with free-flow speed u,
/// backward wave speed w (both positive) and jam density kappa.
/// Derived quantities: capacity Q = kappa*w*u/(w+u), critical density
/// K = Q/u and the speed ratio theta = u/w.
class TriangularFD {
public:
    TriangularFD(double u, double w, double kappa) : u_(u), w_(w), kappa_(kappa) {
        if (!(u > 0.0) || !std::isfinite(u)) detail::invalid_fail("free-flow speed u", u);
        if (!(w > 0.0) || !std::isfinite(w)) detail::invalid_fail("wave speed w", w);
        if (!(kappa > 0.0) || !std::isfinite(kappa)) detail::invalid_fail("jam density kappa", kappa);
    }

    double u() const { return u_; }
    double w() const { return w_; }
    double kappa() const { return kappa_; }

    double capacity() const { return kappa_ * w_ * u_ / (w_ + u_); }
    double critical_density() const { return kappa_ * w_ / (w_ + u_); }
    double theta() const { return u_ / w_; }

    /// Flow H(k) in veh/h for a density k in [0, kappa].
    double flow(double k) const {
        if (k < -kDomainSlack || k > kappa_ + kDomainSlack) detail::domain_fail("density k", k);
        k = std::clamp(k, 0.0, kappa_);
        return std::min(u_ * k, w_ * (kappa_ - k));
    }

    /// Maximum passing rate R(v) = Q - K*v seen by an observer moving at
    /// speed v in [-w, u]. This is the concave conjugate of H restricted to
    /// admissible observer speeds; R(-w) = kappa*w and R(u) = 0.
    double passing_rate(double v) const {
        if (v < -w_ - kDomainSlack || v > u_ + kDomainSlack) detail::domain_fail("observer speed v", v);
        return capacity() - critical_density() * v;
    }

private:
    double u_;
    double w_;
    double kappa_;
};

}  // namespace vtflow
