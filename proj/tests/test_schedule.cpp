#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <vector>

#include "unite/rng.hpp"
#include "unite/schedule.hpp"

using namespace unite;

TEST_CASE("linear schedule endpoints and product") {
    const NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
    CHECK(s.beta(1) == 1e-4);
    CHECK(s.beta(1000) == 0.02);

    // independent running product, long double accumulation
    long double prod = 1.0L;
    for (int t = 1; t <= 1000; ++t) prod *= 1.0L - static_cast<long double>(s.beta(t));
    CHECK(std::abs(static_cast<double>(prod) - s.alpha_bar(1000)) <=
          1e-12 * s.alpha_bar(1000));
    // frozen value of the 1000-term product
    CHECK(s.alpha_bar(1000) == doctest::Approx(4.03582976538e-5).epsilon(1e-9));

    CHECK(s.alpha_bar(0) == 1.0);
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        CHECK(s.alpha(t) == 1.0 - s.beta(t));
    }
}

TEST_CASE("single-step schedule") {
    const NoiseSchedule s = make_linear_schedule(1, 0.5, 0.5);
    CHECK(s.alpha_bar(1) == 0.5);
}

TEST_CASE("schedule precondition rejection") {
    CHECK_THROWS_AS(make_linear_schedule(0, 1e-4, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(make_linear_schedule(10, 0.0, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(make_linear_schedule(10, 0.03, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(make_linear_schedule(10, 1e-4, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_cosine_schedule(0), std::invalid_argument);
    CHECK_THROWS_AS(make_cosine_schedule(10, 0.0), std::invalid_argument);
}

TEST_CASE("cosine schedule profile and self-consistency") {
    const NoiseSchedule s = make_cosine_schedule(1000, 0.008);
    CHECK(s.alpha_bar(0) == 1.0);
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        CHECK(s.beta(t) > 0.0);
        CHECK(s.beta(t) <= 0.999);
    }

    // stored alpha_bar vs an independent product of the derived betas
    for (int T : {10, 1000}) {
        const NoiseSchedule c = make_cosine_schedule(T, 0.008);
        long double run = 1.0L;
        for (int t = 1; t <= T; ++t) {
            run *= 1.0L - static_cast<long double>(c.beta(t));
            CHECK(std::abs(static_cast<double>(run) - c.alpha_bar(t)) <=
                  1e-12 * static_cast<double>(run));
        }
    }

    // where no clamping occurs the stored values match the analytic profile
    const auto profile = [](int t, int T) {
        const double f = [](double u) {
            const double c = std::cos((u + 0.008) / 1.008 * std::acos(0.0));
            return c * c;
        }(static_cast<double>(t) / T);
        const double f0 = [](double u) {
            const double c = std::cos((u + 0.008) / 1.008 * std::acos(0.0));
            return c * c;
        }(0.0);
        return f / f0;
    };
    for (int t = 1; t <= 900; ++t)
        CHECK(s.alpha_bar(t) ==
              doctest::Approx(profile(t, 1000)).epsilon(1e-10));
}

TEST_CASE("q_sample arithmetic") {
    const NoiseSchedule s = make_linear_schedule(100, 1e-4, 0.2);

    SUBCASE("zero noise scales the signal") {
        const std::vector<double> z0{1.0, -2.0}, noise{0.0, 0.0};
        const auto out = q_sample(s, z0, 50, noise);
        const double sa = std::sqrt(s.alpha_bar(50));
        CHECK(out[0] == doctest::Approx(sa * 1.0).epsilon(1e-15));
        CHECK(out[1] == doctest::Approx(sa * -2.0).epsilon(1e-15));
    }

    SUBCASE("zero signal passes scaled noise through") {
        const std::vector<double> z0{0.0}, noise{1.5};
        const auto out = q_sample(s, z0, 100, noise);
        CHECK(out[0] ==
              doctest::Approx(std::sqrt(1.0 - s.alpha_bar(100)) * 1.5)
                  .epsilon(1e-15));
    }

    SUBCASE("forced arithmetic at abar = 0.64") {
        // schedule-free check of the formula: build a 1-step schedule with
        // beta = 0.36 so abar_1 = 0.64
        const NoiseSchedule one = make_linear_schedule(1, 0.36, 0.36);
        const std::vector<double> z0{1.0}, noise{0.5};
        const auto out = q_sample(one, z0, 1, noise);
        CHECK(out[0] == doctest::Approx(1.1).epsilon(1e-15));
    }

    SUBCASE("error paths") {
        const std::vector<double> z0{1.0, 2.0}, noise{0.0};
        std::vector<double> out(2);
        CHECK_THROWS_AS(q_sample(s, z0, 50, noise, out), std::invalid_argument);
        const std::vector<double> n2{0.0, 0.0};
        CHECK_THROWS_AS(q_sample(s, z0, 0, n2, out), std::invalid_argument);
        CHECK_THROWS_AS(q_sample(s, z0, 101, n2, out), std::invalid_argument);
    }
}

TEST_CASE("q_sample matches its moments under random noise") {
    const NoiseSchedule s = make_linear_schedule(200, 1e-4, 0.05);
    const int t = 137;
    RngStream rng(2718);
    const std::vector<double> z0{0.7};
    std::vector<double> noise(1), out(1);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        noise[0] = rng.normal();
        q_sample(s, z0, t, noise, out);
        sum += out[0];
        sumsq += out[0] * out[0];
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    const double want_mean = std::sqrt(s.alpha_bar(t)) * 0.7;
    const double want_var = 1.0 - s.alpha_bar(t);
    const double se_mean = std::sqrt(want_var / n);
    const double se_var = want_var * std::sqrt(2.0 / n);
    CHECK(std::abs(mean - want_mean) < 3.0 * se_mean);
    CHECK(std::abs(var - want_var) < 3.0 * se_var);
}

TEST_CASE("epsilon/score conversions") {
    const NoiseSchedule one = make_linear_schedule(1, 0.25, 0.25);  // abar=0.75
    std::vector<double> eps{1.0}, out(1), back(1);

    epsilon_to_score(eps, one, 1, out);
    CHECK(out[0] == doctest::Approx(2.0).epsilon(1e-15));  // 1/sqrt(0.25)

    signed_score_from_epsilon(eps, one, 1, out);
    CHECK(out[0] == doctest::Approx(-2.0).epsilon(1e-15));

    const std::vector<double> zero{0.0};
    epsilon_to_score(zero, one, 1, out);
    CHECK(out[0] == 0.0);

    // inverse pair round trip
    RngStream rng(3);
    const NoiseSchedule s = make_linear_schedule(100, 1e-4, 0.2);
    for (int trial = 0; trial < 50; ++trial) {
        eps[0] = rng.normal();
        const int t = 1 + static_cast<int>(rng.below(100));
        epsilon_to_score(eps, s, t, out);
        score_to_epsilon(out, s, t, back);
        CHECK(back[0] == doctest::Approx(eps[0]).epsilon(1e-15));
    }
}

TEST_CASE("timestep remapping") {
    const auto linear1000 = make_linear_schedule(1000, 1e-4, 0.02);

    SUBCASE("identical schedules map to the identity") {
        for (int t = 1; t <= 1000; t += 7)
            CHECK(remap_timestep(linear1000, linear1000, t) == t);
    }

    SUBCASE("endpoint maps to endpoint for a half-length schedule") {
        const auto linear500 = make_linear_schedule(500, 1e-4, 0.02);
        CHECK(remap_timestep(linear1000, linear500, 1000) == 500);
    }

    SUBCASE("nearest alpha_bar against brute force, cosine target") {
        const auto cosine1000 = make_cosine_schedule(1000, 0.008);
        // independent exhaustive search
        const auto brute = [&](int t_master) {
            const double target = linear1000.alpha_bar(t_master);
            int best = 1;
            double best_diff = 1e300;
            for (int t = 1; t <= 1000; ++t) {
                const double d = std::abs(cosine1000.alpha_bar(t) - target);
                if (d < best_diff) {
                    best_diff = d;
                    best = t;
                }
            }
            return best;
        };
        for (int t : {1, 123, 500, 777, 1000})
            CHECK(remap_timestep(linear1000, cosine1000, t) == brute(t));
    }

    SUBCASE("monotone non-decreasing in the master timestep") {
        const auto cosine300 = make_cosine_schedule(300, 0.008);
        int prev = remap_timestep(linear1000, cosine300, 1);
        for (int t = 2; t <= 1000; ++t) {
            const int cur = remap_timestep(linear1000, cosine300, t);
            CHECK(cur >= prev);
            prev = cur;
        }
    }
}
