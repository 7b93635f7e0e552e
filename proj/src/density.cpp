#include "unite/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace unite {

namespace {

constexpr double kDensityFloor = 1e-300;  // clamp before exponentiation

void check_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
    if (!(a == b))
        throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

}  // namespace

void GridSpec::validate(int min_bins) const {
    if (dims != 1 && dims != 2)
        throw std::invalid_argument("grid supports 1 or 2 dimensions");
    for (int a = 0; a < dims; ++a) {
        if (bins[static_cast<std::size_t>(a)] < min_bins)
            throw std::invalid_argument("grid too coarse: need at least " +
                                        std::to_string(min_bins) +
                                        " bins per axis");
        if (!(lo[static_cast<std::size_t>(a)] < hi[static_cast<std::size_t>(a)]))
            throw std::invalid_argument("grid bounds must satisfy lo < hi");
    }
}

std::size_t GridSpec::cells() const {
    std::size_t n = static_cast<std::size_t>(bins[0]);
    if (dims == 2) n *= static_cast<std::size_t>(bins[1]);
    return n;
}

double GridSpec::cell_width(int axis) const {
    const auto a = static_cast<std::size_t>(axis);
    return (hi[a] - lo[a]) / bins[a];
}

double GridSpec::center(int axis, int index) const {
    const auto a = static_cast<std::size_t>(axis);
    return lo[a] + (index + 0.5) * cell_width(axis);
}

GridDensity::GridDensity(GridSpec spec, std::vector<double> mass)
    : spec_(spec), mass_(std::move(mass)) {
    spec_.validate();
    if (mass_.size() != spec_.cells())
        throw std::invalid_argument("grid mass has wrong cell count");
    double total = 0.0;
    for (double m : mass_) {
        if (!(m >= 0.0) || !std::isfinite(m))
            throw std::invalid_argument("grid mass must be finite and >= 0");
        total += m;
    }
    if (total <= 0.0)
        throw std::invalid_argument("grid mass sums to zero");
    for (double& m : mass_) m /= total;
}

std::vector<double> GridDensity::mean() const {
    std::vector<double> mu(static_cast<std::size_t>(spec_.dims), 0.0);
    if (spec_.dims == 1) {
        for (int i = 0; i < spec_.bins[0]; ++i)
            mu[0] += mass_[static_cast<std::size_t>(i)] * spec_.center(0, i);
    } else {
        for (int ix = 0; ix < spec_.bins[0]; ++ix)
            for (int iy = 0; iy < spec_.bins[1]; ++iy) {
                const double m = mass_[static_cast<std::size_t>(ix) *
                                           spec_.bins[1] +
                                       iy];
                mu[0] += m * spec_.center(0, ix);
                mu[1] += m * spec_.center(1, iy);
            }
    }
    return mu;
}

double GridDensity::entropy() const {
    double h = 0.0;
    for (double m : mass_)
        if (m > 0.0) h -= m * std::log(m);
    return h;
}

GridDensity diffused_marginal_density(const DiagMixture& dist,
                                      const NoiseSchedule& schedule, int t,
                                      const GridSpec& grid) {
    grid.validate(16);
    if (dist.dim != grid.dims)
        throw std::invalid_argument("distribution/grid dimension mismatch");
    if (dist.components.empty())
        throw std::invalid_argument("mixture has no components");

    std::vector<double> mass(grid.cells(), 0.0);
    std::vector<double> z(static_cast<std::size_t>(grid.dims));
    if (grid.dims == 1) {
        for (int i = 0; i < grid.bins[0]; ++i) {
            z[0] = grid.center(0, i);
            mass[static_cast<std::size_t>(i)] =
                std::exp(gmm_diffused_log_density(dist.components, schedule, t, z));
        }
    } else {
        for (int ix = 0; ix < grid.bins[0]; ++ix)
            for (int iy = 0; iy < grid.bins[1]; ++iy) {
                z[0] = grid.center(0, ix);
                z[1] = grid.center(1, iy);
                mass[static_cast<std::size_t>(ix) * grid.bins[1] + iy] =
                    std::exp(
                        gmm_diffused_log_density(dist.components, schedule, t, z));
            }
    }
    return GridDensity(grid, std::move(mass));
}

GridDensity power_blend(std::span<const GridDensity> densities,
                        std::span<const double> a) {
    if (densities.empty() || densities.size() != a.size())
        throw std::invalid_argument("power_blend: one exponent per density");
    const GridSpec& spec = densities.front().spec();
    for (const auto& d : densities)
        check_same_grid(d.spec(), spec, "power_blend");

    std::vector<double> mass(spec.cells(), 0.0);
    for (std::size_t c = 0; c < mass.size(); ++c) {
        double lg = 0.0;
        for (std::size_t i = 0; i < densities.size(); ++i)
            lg += a[i] *
                  std::log(std::max(densities[i].mass_at(c), kDensityFloor));
        mass[c] = std::exp(lg);
    }
    return GridDensity(spec, std::move(mass));
}

ProductResult product_density(std::span<const GridDensity> conditionals,
                              const GridDensity& unconditional_blend,
                              std::span<const double> w) {
    if (conditionals.empty() || conditionals.size() != w.size())
        throw std::invalid_argument("product_density: one weight per density");
    const GridSpec& spec = unconditional_blend.spec();
    for (const auto& d : conditionals)
        check_same_grid(d.spec(), spec, "product_density");

    double wsum = 0.0;
    for (double wi : w) wsum += wi;

    std::size_t zeroed = 0;
    std::vector<double> mass(spec.cells(), 0.0);
    for (std::size_t c = 0; c < mass.size(); ++c) {
        bool any_positive = false;
        bool exact_zero = false;  // a zero conditional with nonzero weight
        double lg = 0.0;
        for (std::size_t i = 0; i < conditionals.size(); ++i) {
            const double p = conditionals[i].mass_at(c);
            any_positive = any_positive || p > 0.0;
            exact_zero = exact_zero || (p == 0.0 && w[i] != 0.0);
            lg += w[i] * std::log(std::max(p, kDensityFloor));
        }
        if (exact_zero) {
            mass[c] = 0.0;
            continue;
        }
        const double pu = unconditional_blend.mass_at(c);
        if (pu <= 0.0) {
            if (any_positive) ++zeroed;
            mass[c] = 0.0;
            continue;
        }
        lg -= (wsum - 1.0) * std::log(std::max(pu, kDensityFloor));
        mass[c] = std::exp(lg);
    }
    double total = 0.0;
    for (double m : mass) total += m;
    if (!(total > 0.0))
        throw std::runtime_error(
            "product_density: conditionals have no overlapping support");
    GridDensity density(spec, std::move(mass));
    std::size_t tiny = 0;
    for (std::size_t c = 0; c < density.cells(); ++c)
        if (density.mass_at(c) < 1e-15) ++tiny;
    return ProductResult{std::move(density), zeroed, tiny};
}

double tv_distance(const GridDensity& p, const GridDensity& q) {
    check_same_grid(p.spec(), q.spec(), "tv_distance");
    double acc = 0.0;
    for (std::size_t c = 0; c < p.cells(); ++c)
        acc += std::abs(p.mass_at(c) - q.mass_at(c));
    return 0.5 * acc;
}

HistogramResult histogram(std::span<const double> sample_rows,
                          std::size_t count, int dim, const GridSpec& grid) {
    grid.validate(1);
    if (count == 0) throw std::invalid_argument("histogram: empty batch");
    if (dim != grid.dims)
        throw std::invalid_argument("histogram: sample/grid dimension mismatch");

    std::vector<double> mass(grid.cells(), 0.0);
    std::size_t outside = 0;
    for (std::size_t i = 0; i < count; ++i) {
        std::array<int, 2> idx{0, 0};
        bool in = true;
        for (int a = 0; a < dim; ++a) {
            const double v = sample_rows[i * static_cast<std::size_t>(dim) +
                                         static_cast<std::size_t>(a)];
            const auto au = static_cast<std::size_t>(a);
            if (v < grid.lo[au] || v >= grid.hi[au]) {
                in = false;
                break;
            }
            idx[au] = static_cast<int>((v - grid.lo[au]) / grid.cell_width(a));
            idx[au] = std::min(idx[au], grid.bins[au] - 1);
        }
        if (!in) {
            ++outside;
            continue;
        }
        const std::size_t cell =
            dim == 1 ? static_cast<std::size_t>(idx[0])
                     : static_cast<std::size_t>(idx[0]) * grid.bins[1] + idx[1];
        mass[cell] += 1.0;
    }
    if (outside == count)
        throw std::runtime_error("histogram: every sample fell outside the grid");
    return HistogramResult{GridDensity(grid, std::move(mass)), outside};
}

Moments moments(std::span<const double> sample_rows, std::size_t count,
                int dim) {
    if (count == 0) throw std::invalid_argument("moments: empty batch");
    const auto d = static_cast<std::size_t>(dim);
    Moments m;
    m.mean.assign(d, 0.0);
    m.covariance.assign(d * d, 0.0);
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t k = 0; k < d; ++k) m.mean[k] += sample_rows[i * d + k];
    for (std::size_t k = 0; k < d; ++k)
        m.mean[k] /= static_cast<double>(count);
    if (count == 1) return m;  // covariance undefined, left at zero
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t r = 0; r < d; ++r) {
            const double dr = sample_rows[i * d + r] - m.mean[r];
            for (std::size_t c = 0; c < d; ++c)
                m.covariance[r * d + c] +=
                    dr * (sample_rows[i * d + c] - m.mean[c]);
        }
    for (double& v : m.covariance) v /= static_cast<double>(count - 1);
    return m;
}

void write_density_csv(const GridDensity& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    char buf[96];
    const auto& spec = d.spec();
    if (spec.dims == 1) {
        out << "x,mass\n";
        for (int i = 0; i < spec.bins[0]; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", spec.center(0, i),
                          d.mass_at(static_cast<std::size_t>(i)));
            out << buf;
        }
    } else {
        out << "x,y,mass\n";
        for (int ix = 0; ix < spec.bins[0]; ++ix)
            for (int iy = 0; iy < spec.bins[1]; ++iy) {
                std::snprintf(
                    buf, sizeof buf, "%.17g,%.17g,%.17g\n", spec.center(0, ix),
                    spec.center(1, iy),
                    d.mass_at(static_cast<std::size_t>(ix) * spec.bins[1] + iy));
                out << buf;
            }
    }
}

void write_density_pgm(const GridDensity& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    const auto& spec = d.spec();
    const int w = spec.dims == 1 ? spec.bins[0] : spec.bins[1];
    const int h = spec.dims == 1 ? 1 : spec.bins[0];
    double peak = 0.0;
    for (std::size_t c = 0; c < d.cells(); ++c)
        peak = std::max(peak, d.mass_at(c));
    out << "P5\n" << w << " " << h << "\n255\n";
    for (int row = 0; row < h; ++row)
        for (int col = 0; col < w; ++col) {
            const std::size_t cell =
                static_cast<std::size_t>(row) * w + static_cast<std::size_t>(col);
            const double v = peak > 0.0 ? d.mass_at(cell) / peak : 0.0;
            const auto byte = static_cast<unsigned char>(
                std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
            out.put(static_cast<char>(byte));
        }
}

}  // namespace unite
