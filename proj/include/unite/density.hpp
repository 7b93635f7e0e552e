#pragma once

// Brute-force ground truth on rectangular grids (1-D / 2-D): tabulated
// densities, the generalized-product combination, and distances/moments.
// Everything here is independent of the sampling path and exists to check it.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "unite/expert.hpp"
#include "unite/schedule.hpp"

namespace unite {

struct GridSpec {
    int dims = 1;  // 1 or 2
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{0.0, 0.0};
    std::array<int, 2> bins{0, 0};

    void validate(int min_bins = 1) const;
    std::size_t cells() const;
    double cell_width(int axis) const;
    double center(int axis, int index) const;
    bool operator==(const GridSpec&) const = default;
};

class GridDensity {
public:
    GridDensity(GridSpec spec, std::vector<double> mass);  // normalizes

    const GridSpec& spec() const { return spec_; }
    // row-major cell layout; 2-D index is ix * bins[1] + iy
    std::span<const double> mass() const { return mass_; }
    double mass_at(std::size_t cell) const { return mass_[cell]; }
    std::size_t cells() const { return mass_.size(); }

    std::vector<double> mean() const;
    double entropy() const;  // natural log, of the cell masses

private:
    GridSpec spec_;
    std::vector<double> mass_;
};

struct DiagMixture {
    int dim = 1;
    std::vector<GmmComponent> components;
};

// Exact diffused marginal of the mixture at timestep t (t = 0 gives the data
// density itself), tabulated at cell centers and normalized over the grid.
// Rejects grids with fewer than 16 bins per axis.
GridDensity diffused_marginal_density(const DiagMixture& dist,
                                      const NoiseSchedule& schedule, int t,
                                      const GridSpec& grid);

// Cellwise p_out ∝ prod_i p_i^{a_i}, renormalized: the reliability-blended
// unconditional density.
GridDensity power_blend(std::span<const GridDensity> densities,
                        std::span<const double> a);

struct ProductResult {
    GridDensity density;
    std::size_t zeroed_cells = 0;  // conditional mass over a zero blend
    std::size_t tiny_cells = 0;    // below 1e-15 after normalization (kept)
};

// Cellwise (prod_i p_i^{w_i}) / p_blend^{(sum w - 1)}, renormalized. Cells
// where some conditional is positive but the blend is zero are zeroed and
// counted. Throws if nothing remains.
ProductResult product_density(std::span<const GridDensity> conditionals,
                              const GridDensity& unconditional_blend,
                              std::span<const double> w);

// (1/2) sum |p - q|
double tv_distance(const GridDensity& p, const GridDensity& q);

struct HistogramResult {
    GridDensity density;
    std::size_t out_of_range = 0;
};

HistogramResult histogram(std::span<const double> sample_rows,
                          std::size_t count, int dim, const GridSpec& grid);

struct Moments {
    std::vector<double> mean;
    std::vector<double> covariance;  // dim x dim, row-major, unbiased
};

Moments moments(std::span<const double> sample_rows, std::size_t count,
                int dim);

// CSV rows "x[,y],mass"; PGM heatmap is 8-bit, row-major, max-normalized.
void write_density_csv(const GridDensity& d, const std::string& path);
void write_density_pgm(const GridDensity& d, const std::string& path);

}  // namespace unite
