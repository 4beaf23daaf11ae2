#pragma once

#include <cstdio>
#include <stdexcept>

// Shared conventions for the library.
//
// Units are kilometres, hours and vehicles everywhere: speeds in km/h,
// densities in veh/km, flows in veh/h, inflow rates in veh/(km h).
// Callers working in other units convert at the boundary.

namespace vtflow {

// Absolute slack used when validating floating-point domain bounds, so that
// values produced by arithmetic that lands exactly on a boundary (clamped
// densities, cone endpoints) are not rejected for a 1-ulp overshoot.
inline constexpr double kDomainSlack = 1e-9;

namespace detail {

[[noreturn]] inline void domain_fail(const char* quantity, double value) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s out of domain: %.17g", quantity, value);
    throw std::domain_error(buf);
}

[[noreturn]] inline void invalid_fail(const char* quantity, double value) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "invalid %s: %.17g", quantity, value);
    throw std::invalid_argument(buf);
}

}  // namespace detail

}  // namespace vtflow
