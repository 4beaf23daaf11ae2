#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "vtflow/closed_form.hpp"
#include "vtflow/varnet.hpp"

using namespace vtflow;

namespace {

const TriangularFD kFd(100.0, 100.0, 150.0);   // Q = 7500, K = 75, theta = 1
const TriangularFD kFd2(120.0, 60.0, 180.0);   // Q = 7200, K = 60, theta = 2
const ExogenousSource kNoSource{ConstantSource{0.0}};

std::vector<double> linear_boundary(const VariationalNet& net, double k0) {
    std::vector<double> g(static_cast<size_t>(net.columns()));
    for (int j = 0; j < net.columns(); ++j)
        g[static_cast<size_t>(j)] = -k0 * net.node_x(j);
    return g;
}

/// Column displacements reachable in `levels` lattice steps with moves
/// {+theta, 0, -1}, ignoring the lattice edges.
std::set<int> reachable_displacements(int theta, int levels) {
    std::set<int> cur{0};
    for (int l = 0; l < levels; ++l) {
        std::set<int> next;
        for (int d : cur) {
            next.insert(d + theta);
            next.insert(d);
            next.insert(d - 1);
        }
        cur = std::move(next);
    }
    return cur;
}

}  // namespace

TEST_CASE("lattice combinatorics and zero-source link costs") {
    const double dt = 0.1;
    const VariationalNet net = build_net(kFd, 0.2, 2.0 * kFd.u() * dt, dt, kNoSource);
    CHECK(net.theta() == 1);
    CHECK(net.levels() == 3);
    CHECK(net.columns() == 3);
    CHECK(net.n_nodes() == 9);
    CHECK(net.n_links() == 14);
    CHECK(net.pitch() == Catch::Approx(kFd.w() * dt));

    CHECK_FALSE(net.has_link(0, 0, LinkSlope::Down));
    CHECK(net.has_link(0, 1, LinkSlope::Down));
    CHECK(net.has_link(0, 1, LinkSlope::Up));
    CHECK_FALSE(net.has_link(0, 2, LinkSlope::Up));
    CHECK_FALSE(net.has_link(2, 1, LinkSlope::Stay));  // last level emits nothing
    CHECK_THROWS_AS(net.cost(0, 0, LinkSlope::Down), std::domain_error);

    for (int level = 0; level < 2; ++level)
        for (int ix = 0; ix < 3; ++ix) {
            if (net.has_link(level, ix, LinkSlope::Stay))
                CHECK(net.cost(level, ix, LinkSlope::Stay) ==
                      Catch::Approx(kFd.capacity() * dt));
            if (net.has_link(level, ix, LinkSlope::Up))
                CHECK(net.cost(level, ix, LinkSlope::Up) == Catch::Approx(0.0).margin(1e-12));
            if (net.has_link(level, ix, LinkSlope::Down))
                CHECK(net.cost(level, ix, LinkSlope::Down) ==
                      Catch::Approx(kFd.w() * kFd.kappa() * dt));
        }
}

TEST_CASE("theta 2 lattice: wave links span one pitch, free-flow links two") {
    const double dt = 0.1;
    const VariationalNet net = build_net(kFd2, 0.2, 2.0 * kFd2.u() * dt, dt, kNoSource);
    CHECK(net.theta() == 2);
    CHECK(net.levels() == 3);
    CHECK(net.columns() == 5);
    CHECK(net.n_links() == 24);
    CHECK(net.pitch() == Catch::Approx(kFd2.w() * dt));
    // Slope-u links advance theta columns, exactly the free-flow distance.
    CHECK(net.node_x(2) - net.node_x(0) == Catch::Approx(kFd2.u() * dt));
    CHECK_FALSE(net.has_link(0, 3, LinkSlope::Up));
    CHECK(net.has_link(0, 2, LinkSlope::Up));
    CHECK(net.cost(0, 1, LinkSlope::Down) == Catch::Approx(kFd2.w() * kFd2.kappa() * dt));
}

TEST_CASE("link costs match the closed-form trapezoid for constant inflow") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> ad(-1500.0, 1500.0);
    std::uniform_real_distribution<double> xd(-5.0, 15.0);
    std::uniform_real_distribution<double> td(0.01, 0.2);
    for (int trial = 0; trial < 100; ++trial) {
        const double a = ad(rng), x0 = xd(rng), t0 = td(rng), tau = td(rng);
        const ExogenousSource src{ConstantSource{a}};
        for (LinkSlope s : {LinkSlope::Down, LinkSlope::Stay, LinkSlope::Up}) {
            const double v = slope_speed(kFd, s);
            const double x1 = x0 + v * tau;
            const double expect =
                kFd.passing_rate(v) * tau - a * tau * (x0 + x1) / 2.0;
            const double got = link_cost(kFd, src, t0, x0, tau, v);
            CHECK(got == Catch::Approx(expect).margin(1e-9 * std::max(1.0, std::abs(expect))));
            // Midpoint sampling is exact when the potential is linear.
            CHECK(link_cost_estimate(kFd, src, t0, x0, tau, v) ==
                  Catch::Approx(got).margin(1e-9 * std::max(1.0, std::abs(got))));
        }
    }

    // Two-cell sampled field, chord crossing the cell edge: exact integral
    // differs from the midpoint estimate by the worked amounts.
    const TriangularFD fd(2.0, 1.0, 3.0);  // R(u) = 0, so the cost is pure J
    const ExogenousSource src{CellSampledSource(0.0, 1.0, {1.0, 3.0})};
    CHECK(link_cost(fd, src, 0.0, 0.0, 1.0, 2.0) == Catch::Approx(-1.5));
    CHECK(link_cost_estimate(fd, src, 0.0, 0.0, 1.0, 2.0) == Catch::Approx(-1.0));
}

TEST_CASE("zero-source shortest paths: boundary identity and reachable-cone minimum") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> gd(-500.0, 500.0);

    struct Setup {
        const TriangularFD* fd;
        int target_ix;
        int target_level;
    };
    const Setup setups[] = {{&kFd, 6, 4}, {&kFd2, 8, 3}};
    for (const Setup& su : setups) {
        const TriangularFD& fd = *su.fd;
        const double dt = 0.05;
        const int theta = static_cast<int>(std::round(fd.theta()));
        const VariationalNet net = build_net(fd, 0.5, 8.0 * fd.u() * dt, dt, kNoSource);
        std::vector<double> g(static_cast<size_t>(net.columns()));
        for (double& v : g) v = gd(rng);

        const auto surface = solve_all(net, g);
        for (int j = 0; j < net.columns(); ++j)
            CHECK(surface[0][static_cast<size_t>(j)] == g[static_cast<size_t>(j)]);

        const int jp = su.target_ix, lp = su.target_level;
        const double t = net.node_time(lp), x = net.node_x(jp);
        const double Q = fd.capacity(), K = fd.critical_density();
        // Passing rates are linear in speed, so every lattice path from y
        // costs Q*t - K*(x - y); the lattice minimum scans the reachable
        // start columns.
        double expect = std::numeric_limits<double>::infinity();
        for (int d : reachable_displacements(theta, lp)) {
            const int c = jp - d;
            if (c < 0 || c >= net.columns()) continue;
            expect = std::min(expect,
                              g[static_cast<size_t>(c)] + Q * t - K * (x - net.node_x(c)));
        }
        const double got = solve_N(net, g, NodeId{lp, jp});
        CHECK(got == Catch::Approx(expect).margin(1e-9 * std::max(1.0, std::abs(expect))));

        // Boundary values outside the cone cannot influence the node.
        std::vector<double> g2 = g;
        for (int c = 0; c < net.columns(); ++c)
            if (c < jp - theta * lp || c > jp + lp) g2[static_cast<size_t>(c)] += 1000.0;
        CHECK(solve_N(net, g2, NodeId{lp, jp}) == got);

        // A uniform shift of the data shifts the solution by the same amount.
        for (double& v : g2) v = g[static_cast<size_t>(&v - g2.data())] + 42.0;
        CHECK(solve_N(net, g2, NodeId{lp, jp}) ==
              Catch::Approx(got + 42.0).margin(1e-9 * std::max(1.0, std::abs(got))));
    }
}

TEST_CASE("uniform data without sources reproduces the straight-path minimum") {
    const double dt = 0.1;
    const VariationalNet net = build_net(kFd, 0.4, 12.0 * kFd.u() * dt, dt, kNoSource);
    for (double k0 : {0.0, 37.5, 75.0, 120.0, 150.0}) {
        const ConstantIVP ivp(kFd, k0, 0.0);
        const auto surface = solve_all(net, linear_boundary(net, k0));
        for (int level = 0; level < net.levels(); ++level)
            for (int j = level; j + level < net.columns(); ++j) {
                const double expect = n_value(ivp, net.node_time(level), net.node_x(j));
                CHECK(surface[static_cast<size_t>(level)][static_cast<size_t>(j)] ==
                      Catch::Approx(expect).margin(1e-9));
            }
    }
}

TEST_CASE("constant inflow on an aligned lattice matches the analytic count") {
    struct Case {
        const TriangularFD* fd;
        double k0, a;
        double dt, length;
        int level, ix;
    };
    // Interior-vertex cases are aligned: the capacity time is a whole
    // number of steps and the optimal start and switch land on nodes.
    const Case cases[] = {
        {&kFd, 30.0, 150.0, 0.1, 120.0, 5, 6},    // interior vertex at y = 50
        {&kFd2, 30.0, 100.0, 0.1, 96.0, 5, 10},   // interior vertex at y = 36
        {&kFd, 120.0, -225.0, 0.1, 120.0, 5, 6},  // draining, switch on a node
        {&kFd, 120.0, -90.0, 0.1, 120.0, 4, 7},   // still filling toward K
        {&kFd, 60.0, 0.0, 0.1, 120.0, 4, 7},      // no inflow at all
    };
    for (const Case& c : cases) {
        const ExogenousSource src{ConstantSource{c.a}};
        const VariationalNet net = build_net(*c.fd, c.dt * (c.level + 1.0), c.length, c.dt, src);
        const ConstantIVP ivp(*c.fd, c.k0, c.a);
        const double expect = n_value(ivp, net.node_time(c.level), net.node_x(c.ix));
        const double got = solve_N(net, linear_boundary(net, c.k0), NodeId{c.level, c.ix});
        CHECK(got == Catch::Approx(expect).margin(1e-9 * std::max(1.0, std::abs(expect))));
    }
}

TEST_CASE("refinement: aligned cases are invariant, sampled fields converge") {
    // Aligned constant inflow: halving dt only adds paths that tie.
    const ExogenousSource src{ConstantSource{150.0}};
    const double coarse = solve_N(build_net(kFd, 0.5, 120.0, 0.1, src),
                                  linear_boundary(build_net(kFd, 0.5, 120.0, 0.1, src), 30.0),
                                  NodeId{5, 6});
    const VariationalNet fine_net = build_net(kFd, 0.5, 120.0, 0.05, src);
    const double fine = solve_N(fine_net, linear_boundary(fine_net, 30.0), NodeId{10, 12});
    CHECK(fine == Catch::Approx(coarse).margin(1e-9 * std::max(1.0, std::abs(coarse))));

    // Cell-varying field: refinements only add paths, so the minimum is
    // nonincreasing, and the dyadic gaps shrink.
    const ExogenousSource bumpy{CellSampledSource(0.0, 30.0, {900.0, -400.0, 1300.0, 200.0})};
    std::vector<double> vals;
    for (double dt : {0.1, 0.05, 0.025}) {
        const VariationalNet net = build_net(kFd, 0.4, 120.0, dt, bumpy);
        const int scale = static_cast<int>(std::round(0.1 / dt));
        vals.push_back(solve_N(net, linear_boundary(net, 40.0),
                               NodeId{4 * scale, 6 * scale}));
    }
    CHECK(vals[1] <= vals[0] + 1e-12);
    CHECK(vals[2] <= vals[1] + 1e-12);
    CHECK(vals[1] - vals[2] <= vals[0] - vals[1] + 1e-9);
}

TEST_CASE("build and solve reject malformed input") {
    CHECK_THROWS_AS(build_net(TriangularFD(100.0, 70.0, 150.0), 0.2, 20.0, 0.1, kNoSource),
                    std::invalid_argument);  // theta = 10/7
    CHECK_THROWS_AS(build_net(kFd, 0.25, 20.0, 0.1, kNoSource), std::invalid_argument);
    CHECK_THROWS_AS(build_net(kFd, 0.2, 25.0, 0.1, kNoSource), std::invalid_argument);
    CHECK_THROWS_AS(build_net(kFd, 0.2, 20.0, 0.0, kNoSource), std::invalid_argument);

    const VariationalNet net = build_net(kFd, 0.2, 20.0, 0.1, kNoSource);
    const std::vector<double> short_g(2, 0.0);
    CHECK_THROWS_AS(solve_all(net, short_g), std::invalid_argument);
    const std::vector<double> g(static_cast<size_t>(net.columns()), 0.0);
    CHECK_THROWS_AS(solve_N(net, g, NodeId{9, 0}), std::invalid_argument);
    CHECK_THROWS_AS(solve_N(net, g, NodeId{0, -1}), std::invalid_argument);
}

TEST_CASE("surface export lists every node under the fixed header") {
    const VariationalNet net = build_net(kFd, 0.2, 20.0, 0.1, kNoSource);
    const std::vector<double> g(static_cast<size_t>(net.columns()), 5.0);
    const auto surface = solve_all(net, g);
    std::ostringstream os;
    write_n_surface_csv(net, surface, os);
    std::istringstream is(os.str());
    std::string line;
    REQUIRE(std::getline(is, line));
    CHECK(line == "t_hr, x_km, N_veh");
    size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == net.n_nodes());
}
