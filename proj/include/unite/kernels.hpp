#pragma once

// Elementwise batch kernels used by the samplers and the composition engine.
// Scalar reference implementations plus SIMD variants (AVX2 on x86-64, NEON
// on aarch64) selected at runtime. All variants are bit-identical: they use
// the same mul/add sequence per element and the build disables FMA
// contraction, so equivalence tests compare results exactly.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace unite::kernels {

struct Ops {
    const char* name;
    // out[i] = a*x[i]
    void (*scale)(double* out, const double* x, double a, std::size_t n);
    // out[i] = a*x[i] + b*y[i]
    void (*axpby)(double* out, const double* x, double a, const double* y,
                  double b, std::size_t n);
    // acc[i] += a*x[i]
    void (*axpy)(double* acc, const double* x, double a, std::size_t n);
    // out[i] = a*x[i] + b*y[i] + c*z[i]
    void (*triad)(double* out, const double* x, double a, const double* y,
                  double b, const double* z, double c, std::size_t n);
};

const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when not compiled in or CPU lacks AVX2
const Ops* neon_ops();  // nullptr off aarch64

// Best variant for this CPU, chosen once. force_variant overrides the
// selection ("scalar", "avx2", "neon"); call it before sampling starts.
const Ops& active_ops();
bool force_variant(std::string_view name);

std::vector<std::string> available_variants();

}  // namespace unite::kernels
