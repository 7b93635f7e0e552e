#include "unite/kernels.hpp"

namespace unite::kernels {
namespace {

void scale_scalar(double* out, const double* x, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

void axpby_scalar(double* out, const double* x, double a, const double* y,
                  double b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void axpy_scalar(double* acc, const double* x, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += a * x[i];
}

void triad_scalar(double* out, const double* x, double a, const double* y,
                  double b, const double* z, double c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = a * x[i] + b * y[i] + c * z[i];
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops{"scalar", scale_scalar, axpby_scalar, axpy_scalar,
                         triad_scalar};
    return ops;
}

}  // namespace unite::kernels
