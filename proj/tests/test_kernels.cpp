#include <doctest.h>

#include <cmath>
#include <vector>

#include "unite/kernels.hpp"
#include "unite/rng.hpp"

using namespace unite;

namespace {

std::vector<double> randoms(RngStream& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

}  // namespace

TEST_CASE("scalar kernels compute the exact elementwise expressions") {
    const auto& ops = kernels::scalar_ops();
    std::vector<double> x{1.0, -2.0, 0.5}, y{4.0, 0.25, -1.0}, z{0.0, 1.0, 2.0};
    std::vector<double> out(3);

    ops.scale(out.data(), x.data(), 3.0, 3);
    CHECK(out == std::vector<double>{3.0, -6.0, 1.5});

    ops.axpby(out.data(), x.data(), 2.0, y.data(), -1.0, 3);
    CHECK(out == std::vector<double>{-2.0, -4.25, 2.0});

    out = z;
    ops.axpy(out.data(), x.data(), 2.0, 3);
    CHECK(out == std::vector<double>{2.0, -3.0, 3.0});

    ops.triad(out.data(), x.data(), 1.0, y.data(), 2.0, z.data(), 3.0, 3);
    CHECK(out == std::vector<double>{9.0, 1.5, 4.5});
}

TEST_CASE("simd variants are bit-identical to the scalar reference") {
    RngStream rng(123);
    std::vector<const kernels::Ops*> variants;
    if (kernels::avx2_ops()) variants.push_back(kernels::avx2_ops());
    if (kernels::neon_ops()) variants.push_back(kernels::neon_ops());
    if (variants.empty()) return;  // scalar-only platform

    const auto& ref = kernels::scalar_ops();
    // sizes straddle the vector width and its remainders
    for (std::size_t n : {1ul, 2ul, 3ul, 4ul, 5ul, 8ul, 13ul, 100ul, 1031ul}) {
        const auto x = randoms(rng, n);
        const auto y = randoms(rng, n);
        const auto z = randoms(rng, n);
        const double a = rng.normal(), b = rng.normal(), c = rng.normal();
        for (const auto* ops : variants) {
            std::vector<double> got(n), want(n);

            ops->scale(got.data(), x.data(), a, n);
            ref.scale(want.data(), x.data(), a, n);
            CHECK(got == want);

            ops->axpby(got.data(), x.data(), a, y.data(), b, n);
            ref.axpby(want.data(), x.data(), a, y.data(), b, n);
            CHECK(got == want);

            got = z;
            want = z;
            ops->axpy(got.data(), x.data(), a, n);
            ref.axpy(want.data(), x.data(), a, n);
            CHECK(got == want);

            ops->triad(got.data(), x.data(), a, y.data(), b, z.data(), c, n);
            ref.triad(want.data(), x.data(), a, y.data(), b, z.data(), c, n);
            CHECK(got == want);
        }
    }
}

TEST_CASE("kernels allow in-place updates") {
    const auto& ops = kernels::active_ops();
    std::vector<double> x{1.0, 2.0, 3.0, 4.0, 5.0};
    const std::vector<double> noise{0.5, 0.5, 0.5, 0.5, 0.5};
    ops.triad(x.data(), x.data(), 2.0, noise.data(), 1.0, noise.data(), -1.0, 5);
    CHECK(x == std::vector<double>{2.0, 4.0, 6.0, 8.0, 10.0});
}

TEST_CASE("variant forcing") {
    CHECK(kernels::force_variant("scalar"));
    CHECK(std::string(kernels::active_ops().name) == "scalar");
    CHECK_FALSE(kernels::force_variant("not-a-variant"));
    // restore the best variant for the remaining tests
    const auto variants = kernels::available_variants();
    CHECK(kernels::force_variant(variants.back()));
}
