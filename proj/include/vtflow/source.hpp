#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "vtflow/common.hpp"
#include "vtflow/fundamental_diagram.hpp"
#include "vtflow/grid.hpp"

namespace vtflow {

// Exogenous inflow profiles phi(t,x) in veh/(km h). All variants are constant
// in time; time enters the interface so that per-step frozen fields slot in
// uniformly. The associated potential is
//
//     Phi(t,x) = -integral_{0}^{x} phi(t,y) dy,
//
// always taken from y = 0. Shifting the reference adds the same constant to
// every path cost built from Phi, so consumers that difference potentials are
// unaffected; fixing it once keeps values comparable across modules.

/// phi(x) = a everywhere.
struct ConstantSource {
    double a = 0.0;
};

/// phi(x) = a_up for x <= x0, a_down for x > x0.
struct StepSource {
    double a_up = 0.0;
    double a_down = 0.0;
    double x0 = 0.0;
};

/// phi(x) = a * x.
struct RampSource {
    double a = 0.0;
};

/// Piecewise-constant rates on a uniform cell grid: phi = phi_cell[i] on
/// [x_origin + i*dx, x_origin + (i+1)*dx). Outside the sampled span the rate
/// is undefined (rate() rejects) but the potential extends with zero inflow.
class CellSampledSource {
public:
    CellSampledSource(double x_origin, double dx, std::vector<double> phi_cell)
        : x_origin_(x_origin), dx_(dx), phi_(std::move(phi_cell)) {
        if (!(dx > 0.0) || !std::isfinite(dx)) detail::invalid_fail("cell width dx", dx);
        if (phi_.empty()) detail::invalid_fail("cell count", 0.0);
        cum_.resize(phi_.size() + 1, 0.0);
        for (size_t i = 0; i < phi_.size(); ++i) cum_[i + 1] = cum_[i] + phi_[i] * dx_;
    }

    double x_origin() const { return x_origin_; }
    double dx() const { return dx_; }
    size_t n_cells() const { return phi_.size(); }
    double x_end() const { return x_origin_ + dx_ * static_cast<double>(phi_.size()); }
    const std::vector<double>& values() const { return phi_; }

    bool contains(double x) const {
        return x >= x_origin_ - kDomainSlack && x <= x_end() + kDomainSlack;
    }

    double value_at(double x) const {
        if (!contains(x)) detail::domain_fail("sampled source position x", x);
        auto i = static_cast<long>(std::floor((x - x_origin_) / dx_));
        i = std::clamp<long>(i, 0, static_cast<long>(phi_.size()) - 1);
        return phi_[static_cast<size_t>(i)];
    }

    /// integral_{x_origin}^{x} phi, clamped to the sampled span (zero inflow
    /// outside).
    double cumulative(double x) const {
        if (x <= x_origin_) return 0.0;
        if (x >= x_end()) return cum_.back();
        auto i = static_cast<size_t>(std::floor((x - x_origin_) / dx_));
        i = std::min(i, phi_.size() - 1);
        return cum_[i] + phi_[i] * (x - (x_origin_ + i * dx_));
    }

private:
    double x_origin_;
    double dx_;
    std::vector<double> phi_;
    std::vector<double> cum_;  // cum_[i] = integral over the first i cells
};

class ExogenousSource {
public:
    using Variant = std::variant<ConstantSource, StepSource, RampSource, CellSampledSource>;

    ExogenousSource(ConstantSource s) : v_(s) {}
    ExogenousSource(StepSource s) : v_(s) {}
    ExogenousSource(RampSource s) : v_(s) {}
    ExogenousSource(CellSampledSource s) : v_(std::move(s)) {}

    const Variant& variant() const { return v_; }

    /// Inflow rate phi(t,x) in veh/(km h).
    double rate(double /*t*/, double x) const {
        return std::visit(
            [x](const auto& s) -> double {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, ConstantSource>) return s.a;
                if constexpr (std::is_same_v<T, StepSource>) return x <= s.x0 ? s.a_up : s.a_down;
                if constexpr (std::is_same_v<T, RampSource>) return s.a * x;
                if constexpr (std::is_same_v<T, CellSampledSource>) return s.value_at(x);
            },
            v_);
    }

    /// Potential Phi(t,x) = -integral_0^x phi(t,y) dy.
    double potential(double /*t*/, double x) const {
        return std::visit(
            [x](const auto& s) -> double {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, ConstantSource>) return -s.a * x;
                if constexpr (std::is_same_v<T, StepSource>) {
                    // Antiderivative anchored at the step location, then
                    // re-anchored at zero; exact for any ordering of 0, x, x0.
                    auto from_step = [&s](double p) {
                        return p <= s.x0 ? s.a_up * (p - s.x0) : s.a_down * (p - s.x0);
                    };
                    return -(from_step(x) - from_step(0.0));
                }
                if constexpr (std::is_same_v<T, RampSource>) return -0.5 * s.a * x * x;
                if constexpr (std::is_same_v<T, CellSampledSource>)
                    return -(s.cumulative(x) - s.cumulative(0.0));
            },
            v_);
    }

    /// Positions in (lo, hi) where Phi(t, .) changes slope. Used to split
    /// line integrals into exactly-integrable pieces.
    std::vector<double> potential_kinks(double lo, double hi) const {
        std::vector<double> out;
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, StepSource>) {
                    if (s.x0 > lo && s.x0 < hi) out.push_back(s.x0);
                } else if constexpr (std::is_same_v<T, CellSampledSource>) {
                    // Edges of the sampled span included: outside it the
                    // potential is flat.
                    const double dx = s.dx();
                    long first = static_cast<long>(std::ceil((lo - s.x_origin()) / dx - 1e-12));
                    long last = static_cast<long>(std::floor((hi - s.x_origin()) / dx + 1e-12));
                    first = std::max(first, 0L);
                    last = std::min(last, static_cast<long>(s.n_cells()));
                    for (long e = first; e <= last; ++e) {
                        const double x = s.x_origin() + e * dx;
                        if (x > lo && x < hi) out.push_back(x);
                    }
                }
            },
            v_);
        return out;
    }

private:
    Variant v_;
};

/// Exact integral_{t0}^{t1} Phi(s, xi(s)) ds along the straight chord from
/// (t0, x0) to (t1, x1). The potential of every variant is piecewise linear
/// in x except for RampSource (quadratic), so trapezoid sums over the kink
/// breakpoints are exact; the ramp case uses the closed form.
inline double integral_of_potential_along_chord(const ExogenousSource& src, double t0, double x0,
                                                double t1, double x1) {
    const double dt = t1 - t0;
    if (dt <= 0.0) {
        // Leg times assembled from path geometry can round a hair negative.
        if (dt < -kDomainSlack * std::max({1.0, std::abs(t0), std::abs(t1)}))
            detail::invalid_fail("chord duration", dt);
        return 0.0;
    }
    if (const auto* ramp = std::get_if<RampSource>(&src.variant())) {
        // Phi = -a x^2 / 2; integral of x(s)^2 over the chord in closed form.
        return -ramp->a / 6.0 * dt * (x0 * x0 + x0 * x1 + x1 * x1);
    }
    const double lo = std::min(x0, x1);
    const double hi = std::max(x0, x1);
    std::vector<double> cuts = src.potential_kinks(lo, hi);
    // Map each cut position to its time along the chord, then trapezoid.
    std::vector<double> ts;
    ts.reserve(cuts.size() + 2);
    ts.push_back(t0);
    if (x1 != x0) {
        for (double c : cuts) ts.push_back(t0 + dt * (c - x0) / (x1 - x0));
        std::sort(ts.begin(), ts.end());
    }
    ts.push_back(t1);
    double total = 0.0;
    double prev_t = ts.front();
    double prev_phi = src.potential(t0, x0);
    for (size_t i = 1; i < ts.size(); ++i) {
        const double s = std::clamp(ts[i], t0, t1);
        const double x = x0 + (x1 - x0) * ((s - t0) / dt);
        const double p = src.potential(s, x);
        total += 0.5 * (prev_phi + p) * (s - prev_t);
        prev_t = s;
        prev_phi = p;
    }
    return total;
}

// Endogenous linear sources phi(t,x,k). Both keep a, b >= 0; the density
// feedback term is what bounds densities away from blow-up in long runs.

/// phi(k) = a - b*k.
struct SimpleFeedback {
    double a = 0.0;
    double b = 0.0;
};

/// phi(x,k) = a*x - b*u*k: inflow growing linearly along the corridor and
/// exits proportional to the local free-flow throughput.
struct MergeFeedback {
    double a = 0.0;
    double b = 0.0;
};

class EndogenousSource {
public:
    using Variant = std::variant<SimpleFeedback, MergeFeedback>;

    EndogenousSource(SimpleFeedback s) : v_(s) { check(s.a, s.b); }
    EndogenousSource(MergeFeedback s) : v_(s) { check(s.a, s.b); }

    const Variant& variant() const { return v_; }

    double rate(const TriangularFD& fd, double x, double k) const {
        return std::visit(
            [&](const auto& s) -> double {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, SimpleFeedback>) return s.a - s.b * k;
                if constexpr (std::is_same_v<T, MergeFeedback>) return s.a * x - s.b * fd.u() * k;
            },
            v_);
    }

    /// Evaluates the rate at each cell center against the given densities,
    /// producing the exogenous field used for one scheme step.
    CellSampledSource freeze(const TriangularFD& fd, const GridSpec& spec,
                             std::span<const double> k) const {
        std::vector<double> phi(k.size());
        for (size_t i = 0; i < k.size(); ++i)
            phi[i] = rate(fd, spec.cell_center(static_cast<int>(i)), k[i]);
        return CellSampledSource(spec.x_origin, spec.dx, std::move(phi));
    }

private:
    static void check(double a, double b) {
        if (!(a >= 0.0) || !std::isfinite(a)) detail::invalid_fail("inflow coefficient a", a);
        if (!(b >= 0.0) || !std::isfinite(b)) detail::invalid_fail("feedback coefficient b", b);
    }

    Variant v_;
};

// CSV exchange for sampled sources. Schema: one row per cell, cell-center
// position then rate.

inline void write_csv(const CellSampledSource& s, std::ostream& os) {
    os << "x_km, phi_veh_per_km_hr\n";
    char buf[96];
    for (size_t i = 0; i < s.n_cells(); ++i) {
        const double xc = s.x_origin() + (static_cast<double>(i) + 0.5) * s.dx();
        std::snprintf(buf, sizeof buf, "%.12g, %.12g\n", xc, s.values()[i]);
        os << buf;
    }
}

inline CellSampledSource read_cell_source_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("cell source CSV: empty input");
    auto strip = [](std::string t) {
        t.erase(0, t.find_first_not_of(" \t\r"));
        auto e = t.find_last_not_of(" \t\r");
        t.erase(e == std::string::npos ? 0 : e + 1);
        return t;
    };
    if (strip(line) != std::string("x_km, phi_veh_per_km_hr") &&
        strip(line) != std::string("x_km,phi_veh_per_km_hr"))
        throw std::runtime_error("cell source CSV: unexpected header: " + line);
    std::vector<double> xs, phis;
    size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (strip(line).empty()) continue;
        std::istringstream ss(line);
        double x, phi;
        char comma;
        if (!(ss >> x >> comma >> phi) || comma != ',')
            throw std::runtime_error("cell source CSV: malformed line " + std::to_string(line_no));
        xs.push_back(x);
        phis.push_back(phi);
    }
    if (xs.size() < 2) throw std::runtime_error("cell source CSV: need at least two rows");
    const double dx = xs[1] - xs[0];
    if (!(dx > 0.0)) throw std::runtime_error("cell source CSV: positions must increase");
    for (size_t i = 1; i < xs.size(); ++i)
        if (std::abs(xs[i] - xs[0] - static_cast<double>(i) * dx) > 1e-9 * std::max(1.0, std::abs(xs[i])))
            throw std::runtime_error("cell source CSV: non-uniform spacing at row " +
                                     std::to_string(i + 2));
    return CellSampledSource(xs[0] - 0.5 * dx, dx, std::move(phis));
}

}  // namespace vtflow
