#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "vtflow/fundamental_diagram.hpp"

using vtflow::TriangularFD;

TEST_CASE("derived quantities, symmetric diagram") {
    TriangularFD fd(100.0, 100.0, 150.0);
    CHECK(fd.capacity() == Catch::Approx(7500.0).margin(1e-12));
    CHECK(fd.critical_density() == Catch::Approx(75.0).margin(1e-12));
    CHECK(fd.theta() == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("derived quantities, theta = 2") {
    TriangularFD fd(100.0, 50.0, 150.0);
    CHECK(fd.capacity() == Catch::Approx(5000.0).margin(1e-12));
    CHECK(fd.critical_density() == Catch::Approx(50.0).margin(1e-12));
    CHECK(fd.theta() == Catch::Approx(2.0).margin(1e-15));
}

TEST_CASE("flow branches and apex") {
    TriangularFD fd(100.0, 100.0, 150.0);
    CHECK(fd.flow(0.0) == 0.0);
    CHECK(fd.flow(150.0) == 0.0);
    CHECK(fd.flow(75.0) == 7500.0);       // apex: both branches agree
    CHECK(fd.flow(30.0) == 3000.0);       // free-flow side
    CHECK(fd.flow(120.0) == 3000.0);      // congested side
}

TEST_CASE("passing rate endpoints") {
    TriangularFD fd(100.0, 100.0, 150.0);
    CHECK(fd.passing_rate(-100.0) == Catch::Approx(15000.0).margin(1e-9));  // kappa*w
    CHECK(fd.passing_rate(100.0) == Catch::Approx(0.0).margin(1e-9));
    CHECK(fd.passing_rate(0.0) == Catch::Approx(7500.0).margin(1e-9));
}

// R(v) must equal max_k [H(k) - v k]. For a triangular H the maximum over
// [0, kappa] is attained at a vertex, so enumerating {0, K, kappa} is an
// exact independent evaluation.
TEST_CASE("passing rate is the conjugate of the flow function") {
    std::mt19937_64 rng(20240811);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_real_distribution<double> speed(20.0, 130.0);
        std::uniform_real_distribution<double> dens(60.0, 220.0);
        TriangularFD fd(speed(rng), speed(rng), dens(rng));
        std::uniform_real_distribution<double> obs(-fd.w(), fd.u());
        for (int i = 0; i < 20; ++i) {
            double v = obs(rng);
            double best = 0.0;  // k = 0 vertex
            for (double k : {fd.critical_density(), fd.kappa()})
                best = std::max(best, fd.flow(k) - v * k);
            CHECK(fd.passing_rate(v) == Catch::Approx(best).margin(1e-8));
        }
    }
}

TEST_CASE("domain violations are rejected") {
    TriangularFD fd(100.0, 100.0, 150.0);
    CHECK_THROWS_AS(fd.flow(-1.0), std::domain_error);
    CHECK_THROWS_AS(fd.flow(151.0), std::domain_error);
    CHECK_THROWS_AS(fd.passing_rate(-100.1), std::domain_error);
    CHECK_THROWS_AS(fd.passing_rate(100.1), std::domain_error);
    CHECK_THROWS_AS(TriangularFD(0.0, 100.0, 150.0), std::invalid_argument);
    CHECK_THROWS_AS(TriangularFD(100.0, -5.0, 150.0), std::invalid_argument);
    CHECK_THROWS_AS(TriangularFD(100.0, 100.0, 0.0), std::invalid_argument);
}

TEST_CASE("boundary values within slack are clamped, not rejected") {
    TriangularFD fd(100.0, 100.0, 150.0);
    CHECK_NOTHROW(fd.flow(-1e-12));
    CHECK_NOTHROW(fd.flow(150.0 + 1e-12));
    CHECK(fd.flow(-1e-12) == 0.0);
    CHECK_NOTHROW(fd.passing_rate(100.0 + 1e-12));
}
