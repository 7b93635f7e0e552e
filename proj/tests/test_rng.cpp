#include <doctest.h>

#include <cmath>
#include <vector>

#include "unite/rng.hpp"

using namespace unite;

TEST_CASE("streams are reproducible and seed-sensitive") {
    RngStream a(42), b(42), c(43);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        all_equal = all_equal && x == b.next_u64();
        any_diff = any_diff || x != c.next_u64();
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("substreams with different indices differ") {
    auto s0 = RngStream::substream(7, 0);
    auto s1 = RngStream::substream(7, 1);
    bool any_diff = false;
    for (int i = 0; i < 16; ++i) any_diff = any_diff || s0.next_u64() != s1.next_u64();
    CHECK(any_diff);
}

TEST_CASE("uniform01 stays in [0,1)") {
    RngStream rng(5);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal draws have standard moments") {
    // 1e5 draws; tolerances are 3 standard errors
    RngStream rng(99);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("below has no visible modulo bias at small n") {
    RngStream rng(1234);
    std::vector<int> counts(5, 0);
    const int n = 50000;
    for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(rng.below(5))]++;
    for (int c : counts) CHECK(std::abs(c - n / 5) < 5 * std::sqrt(n / 5.0));
}
