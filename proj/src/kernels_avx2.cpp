// AVX2 variants of the batch kernels. Deliberately mul+add (no FMA) so the
// per-element rounding matches the scalar reference exactly.

#include "unite/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define UNITE_KERNELS_X86 1
#else
#define UNITE_KERNELS_X86 0
#endif

#if UNITE_KERNELS_X86

#include <immintrin.h>

namespace unite::kernels {
namespace {

void scale_avx2(double* out, const double* x, double a, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_loadu_pd(x + i);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(va, vx));
    }
    for (; i < n; ++i) out[i] = a * x[i];
}

void axpby_avx2(double* out, const double* x, double a, const double* y,
                double b, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        __m256d vy = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(out + i, _mm256_add_pd(vx, vy));
    }
    for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void axpy_avx2(double* acc, const double* x, double a, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        __m256d vacc = _mm256_loadu_pd(acc + i);
        _mm256_storeu_pd(acc + i, _mm256_add_pd(vacc, vx));
    }
    for (; i < n; ++i) acc[i] += a * x[i];
}

void triad_avx2(double* out, const double* x, double a, const double* y,
                double b, const double* z, double c, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    const __m256d vc = _mm256_set1_pd(c);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        __m256d vy = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
        __m256d vz = _mm256_mul_pd(vc, _mm256_loadu_pd(z + i));
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_add_pd(vx, vy), vz));
    }
    for (; i < n; ++i) out[i] = a * x[i] + b * y[i] + c * z[i];
}

}  // namespace

const Ops* avx2_ops() {
    if (!__builtin_cpu_supports("avx2")) return nullptr;
    static const Ops ops{"avx2", scale_avx2, axpby_avx2, axpy_avx2,
                         triad_avx2};
    return &ops;
}

}  // namespace unite::kernels

#else

namespace unite::kernels {
const Ops* avx2_ops() { return nullptr; }
}  // namespace unite::kernels

#endif
