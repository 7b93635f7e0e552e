#include "unite/sweep.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "unite/density.hpp"
#include "unite/rng.hpp"

namespace unite {

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
    std::uint64_t state = master_seed ^ ((index + 1) * 0x9E3779B97F4A7C15ull);
    return splitmix64_next(state);
}

namespace {

CompositionSpec cell_spec(const CompositionSpec& base, const SweepRequest& req,
                          double value) {
    CompositionSpec spec = base;
    const auto idx = static_cast<std::size_t>(req.index);
    if (idx >= spec.a.size())
        throw ConfigError("sweep index outside the expert range");
    if (req.param == SweepParam::weight) {
        spec.w[idx] = value;
        return spec;
    }
    // reliability: pin a[idx], rescale the rest onto 1 - value
    double others = 0.0;
    for (std::size_t j = 0; j < spec.a.size(); ++j)
        if (j != idx) others += spec.a[j];
    spec.a[idx] = value;
    const double remainder = 1.0 - value;
    for (std::size_t j = 0; j < spec.a.size(); ++j) {
        if (j == idx) continue;
        if (others > 0.0)
            spec.a[j] = spec.a[j] / others * remainder;
        else
            spec.a[j] = remainder / static_cast<double>(spec.a.size() - 1);
    }
    return spec;
}

double oracle_tv(const RunConfig& cfg, const CompositionSpec& spec,
                 const SampleBatch& batch) {
    if (!cfg.all_analytic())
        return std::numeric_limits<double>::quiet_NaN();

    std::vector<GridDensity> conditionals;
    std::vector<GridDensity> unconditionals;
    for (const auto& decl : cfg.experts) {
        const NoiseSchedule& sched = decl.schedule ? *decl.schedule : *cfg.master;
        conditionals.push_back(diffused_marginal_density(
            decl.conditional_mixture(), sched, 0, cfg.grid));
        unconditionals.push_back(diffused_marginal_density(
            decl.unconditional_mixture(), sched, 0, cfg.grid));
    }
    const GridDensity blend = power_blend(unconditionals, spec.a);
    const ProductResult product =
        product_density(conditionals, blend, spec.w);
    const HistogramResult hist =
        histogram(batch.states, batch.count, batch.dim, cfg.grid);
    return tv_distance(hist.density, product.density);
}

}  // namespace

std::vector<SweepCell> run_sweep(const RunConfig& cfg,
                                 const SweepRequest& req) {
    if (req.values.empty()) throw ConfigError("sweep needs at least one value");
    if (req.index < 0 ||
        req.index >= static_cast<int>(cfg.composition.a.size()))
        throw ConfigError("sweep index outside the expert range");

    const ExpertBundle bundle = cfg.build_bundle();
    std::vector<SweepCell> cells;
    cells.reserve(req.values.size());

    for (std::size_t k = 0; k < req.values.size(); ++k) {
        SweepCell cell;
        cell.value = req.values[k];
        cell.spec = cell_spec(cfg.composition, req, cell.value);
        cell.seed = req.shared_noise ? cfg.sampler.seed
                                     : derive_seed(cfg.sampler.seed, k);
        try {
            cell.spec.validate();
        } catch (const std::invalid_argument& e) {
            cell.skipped = true;
            cell.skip_reason = e.what();
            cells.push_back(std::move(cell));
            continue;
        }

        SamplerConfig sampler = cfg.sampler;
        sampler.seed = cell.seed;
        cell.batch = sample(bundle, cell.spec, sampler, cfg.chains);

        const Moments m = moments(cell.batch.states, cell.batch.count,
                                  cell.batch.dim);
        cell.mean = m.mean;
        cell.stddev.resize(m.mean.size());
        for (std::size_t d = 0; d < m.mean.size(); ++d)
            cell.stddev[d] = std::sqrt(m.covariance[d * m.mean.size() + d]);
        cell.tv_to_product = oracle_tv(cfg, cell.spec, cell.batch);
        cells.push_back(std::move(cell));
    }
    return cells;
}

}  // namespace unite
