// NEON variants (aarch64). Same mul+add sequences as the scalar reference;
// vmlaq is avoided because it may fuse.

#include "unite/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace unite::kernels {
namespace {

void scale_neon(double* out, const double* x, double a, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vmulq_f64(va, vld1q_f64(x + i)));
    for (; i < n; ++i) out[i] = a * x[i];
}

void axpby_neon(double* out, const double* x, double a, const double* y,
                double b, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    const float64x2_t vb = vdupq_n_f64(b);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vx = vmulq_f64(va, vld1q_f64(x + i));
        float64x2_t vy = vmulq_f64(vb, vld1q_f64(y + i));
        vst1q_f64(out + i, vaddq_f64(vx, vy));
    }
    for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void axpy_neon(double* acc, const double* x, double a, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vx = vmulq_f64(va, vld1q_f64(x + i));
        vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), vx));
    }
    for (; i < n; ++i) acc[i] += a * x[i];
}

void triad_neon(double* out, const double* x, double a, const double* y,
                double b, const double* z, double c, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    const float64x2_t vb = vdupq_n_f64(b);
    const float64x2_t vc = vdupq_n_f64(c);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vx = vmulq_f64(va, vld1q_f64(x + i));
        float64x2_t vy = vmulq_f64(vb, vld1q_f64(y + i));
        float64x2_t vz = vmulq_f64(vc, vld1q_f64(z + i));
        vst1q_f64(out + i, vaddq_f64(vaddq_f64(vx, vy), vz));
    }
    for (; i < n; ++i) out[i] = a * x[i] + b * y[i] + c * z[i];
}

}  // namespace

const Ops* neon_ops() {
    static const Ops ops{"neon", scale_neon, axpby_neon, axpy_neon,
                         triad_neon};
    return &ops;
}

}  // namespace unite::kernels

#else

namespace unite::kernels {
const Ops* neon_ops() { return nullptr; }
}  // namespace unite::kernels

#endif
