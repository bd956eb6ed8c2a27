#include <cmath>

#include "doctest.h"
#include "lpnsr/rng.hpp"
#include "lpnsr/schedule.hpp"

using namespace lpnsr;

TEST_CASE("geometric schedule values recomputed independently") {
    auto s = build_schedule(4, 0.001, 0.999, 2.0);
    CHECK(s.eta[0] == 0.0);
    // Independent evaluation of the geometric rule.
    for (int t = 1; t <= 4; ++t) {
        const double want = 0.001 * std::pow(0.999 / 0.001, (t - 1) / 3.0);
        CHECK(s.eta[t] == doctest::Approx(want).epsilon(1e-12));
    }
    CHECK(s.eta[1] == doctest::Approx(0.001));
    CHECK(s.eta[2] == doctest::Approx(0.009997).epsilon(1e-3));
    CHECK(s.eta[3] == doctest::Approx(0.09993).epsilon(1e-3));
    CHECK(s.eta[4] == doctest::Approx(0.999));
    CHECK(s.kappa == 2.0);
}

TEST_CASE("single-step schedule hits the endpoint") {
    auto s = build_schedule(1, 0.001, 0.999, 2.0);
    CHECK(s.eta.size() == 2);
    CHECK(s.eta[0] == 0.0);
    CHECK(s.eta[1] == 0.999);
}

TEST_CASE("schedule rejections are distinct configuration errors") {
    CHECK_THROWS_WITH_AS(build_schedule(0, 0.001, 0.999, 2.0),
                         doctest::Contains("T must be >= 1"), ConfigError);
    CHECK_THROWS_WITH_AS(build_schedule(4, 0.0, 0.999, 2.0),
                         doctest::Contains("eta_min must be > 0"), ConfigError);
    CHECK_THROWS_WITH_AS(build_schedule(4, 0.001, 1.0, 2.0),
                         doctest::Contains("eta_max must be < 1"), ConfigError);
    CHECK_THROWS_WITH_AS(build_schedule(4, 0.5, 0.2, 2.0),
                         doctest::Contains("eta_min must be < eta_max"), ConfigError);
    CHECK_THROWS_WITH_AS(build_schedule(4, 0.001, 0.999, -1.0),
                         doctest::Contains("kappa must be > 0"), ConfigError);
}

TEST_CASE("validate detects corrupted sequences") {
    auto s = build_schedule(4, 0.001, 0.999, 2.0);
    s.eta[2] = s.eta[3];  // break monotonicity
    CHECK_THROWS_AS(s.validate(), ConfigError);

    auto s2 = build_schedule(4, 0.001, 0.999, 2.0);
    s2.eta[0] = 1e-9;
    CHECK_THROWS_AS(s2.validate(), ConfigError);
}

TEST_CASE("schedule invariants hold for random valid inputs") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const int T = rng.uniform_int(1, 8);
        const double eta_min = rng.uniform(1e-5, 0.05);
        const double eta_max = rng.uniform(0.5, 0.9999);
        const double kappa = rng.uniform(0.1, 4.0);
        auto s = build_schedule(T, eta_min, eta_max, kappa);

        for (int t = 1; t <= T; ++t) {
            CHECK(s.eta[t] > s.eta[t - 1]);
            CHECK(s.eta[t] > 0.0);
            CHECK(s.eta[t] < 1.0);
            CHECK(s.alpha(t) > 0.0);
        }
        double alpha_sum = 0.0;
        for (int t = 1; t <= T; ++t) alpha_sum += s.alpha(t);
        CHECK(std::fabs(alpha_sum - s.eta[T]) < 1e-6);
    }
}

TEST_CASE("rebuilding with identical arguments is bit-identical") {
    auto a = build_schedule(4, 0.001, 0.999, 2.0);
    auto b = build_schedule(4, 0.001, 0.999, 2.0);
    CHECK(a.eta == b.eta);
    CHECK(a.kappa == b.kappa);
}
