#include "unite/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "unite/kernels.hpp"

namespace unite {

namespace {

void check_sizes(std::span<const double> a, std::span<const double> b,
                 const char* what) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

struct DdpmCoeffs {
    double z, eps, noise;
};

DdpmCoeffs ddpm_coeffs(const NoiseSchedule& schedule, int t,
                       SigmaConvention convention) {
    const double beta = schedule.beta(t);
    const double abar = schedule.alpha_bar(t);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - beta);
    DdpmCoeffs c;
    c.z = inv_sqrt_alpha;
    c.eps = -inv_sqrt_alpha * beta / std::sqrt(1.0 - abar);
    const double sigma = std::sqrt(beta);
    c.noise = convention == SigmaConvention::sigma ? sigma : sigma * sigma;
    if (t == 1) c.noise = 0.0;
    return c;
}

struct DdimCoeffs {
    double z, eps;
};

DdimCoeffs ddim_coeffs(const NoiseSchedule& schedule, int t, int t_prev) {
    if (t_prev < 0 || t_prev >= t)
        throw std::invalid_argument("ddim step needs 0 <= t_prev < t");
    const double abar_t = schedule.alpha_bar(t);
    const double abar_p = schedule.alpha_bar(t_prev);
    // z' = sqrt(abar_p)*zhat0 + sqrt(1-abar_p)*eps, with zhat0 eliminated:
    DdimCoeffs c;
    c.z = std::sqrt(abar_p / abar_t);
    c.eps = std::sqrt(1.0 - abar_p) - c.z * std::sqrt(1.0 - abar_t);
    return c;
}

}  // namespace

void ddpm_step(std::span<const double> z_t, std::span<const double> eps_c,
               const NoiseSchedule& schedule, int t,
               std::span<const double> noise, SigmaConvention convention,
               std::span<double> out) {
    check_sizes(z_t, eps_c, "ddpm_step");
    check_sizes(z_t, noise, "ddpm_step");
    check_sizes(z_t, out, "ddpm_step");
    const DdpmCoeffs c = ddpm_coeffs(schedule, t, convention);
    kernels::active_ops().triad(out.data(), z_t.data(), c.z, eps_c.data(),
                                c.eps, noise.data(), c.noise, out.size());
}

void ddim_step(std::span<const double> z_t, std::span<const double> eps_c,
               const NoiseSchedule& schedule, int t, int t_prev,
               std::span<double> out) {
    check_sizes(z_t, eps_c, "ddim_step");
    check_sizes(z_t, out, "ddim_step");
    const DdimCoeffs c = ddim_coeffs(schedule, t, t_prev);
    kernels::active_ops().axpby(out.data(), z_t.data(), c.z, eps_c.data(),
                                c.eps, out.size());
}

void predict_z0(std::span<const double> z_t, std::span<const double> eps,
                const NoiseSchedule& schedule, int t, std::span<double> out) {
    check_sizes(z_t, eps, "predict_z0");
    check_sizes(z_t, out, "predict_z0");
    const double abar = schedule.alpha_bar(t);
    const double inv_sa = 1.0 / std::sqrt(abar);
    kernels::active_ops().axpby(out.data(), z_t.data(), inv_sa, eps.data(),
                                -std::sqrt(1.0 - abar) * inv_sa, out.size());
}

std::vector<int> ddim_timesteps(int T, int num_steps) {
    if (num_steps < 1 || num_steps > T)
        throw std::invalid_argument("ddim needs 1 <= num_steps <= T");
    std::vector<int> ts(static_cast<std::size_t>(num_steps));
    for (int k = 1; k <= num_steps; ++k)
        ts[static_cast<std::size_t>(k - 1)] = static_cast<int>(
            (static_cast<long long>(k) * T) / num_steps);
    return ts;  // strictly increasing, ends at T
}

SampleBatch sample(const ExpertBundle& bundle, const CompositionSpec& spec,
                   const SamplerConfig& config, std::size_t chains) {
    spec.validate();
    if (spec.experts() != bundle.size())
        throw std::invalid_argument("composition spec and bundle disagree on N");
    if (chains == 0) throw std::invalid_argument("need at least one chain");

    const NoiseSchedule& schedule = bundle.master_schedule();
    const int T = schedule.steps();
    int num_steps = config.num_steps == 0
                        ? (config.kind == SamplerKind::ancestral ? T
                                                                 : std::min(100, T))
                        : config.num_steps;
    if (config.kind == SamplerKind::ancestral && num_steps != T)
        throw std::invalid_argument(
            "ancestral sampling steps through every timestep; num_steps must "
            "be 0 or T");
    if (num_steps < 1 || num_steps > T)
        throw std::invalid_argument("num_steps outside 1..T");

    const auto dim = static_cast<std::size_t>(bundle.dim());
    const std::size_t n = chains * dim;

    std::vector<RngStream> streams;
    streams.reserve(chains);
    for (std::size_t i = 0; i < chains; ++i)
        streams.push_back(RngStream::substream(config.seed, i));

    SampleBatch batch;
    batch.count = chains;
    batch.dim = bundle.dim();
    batch.seed = config.seed;
    batch.states.resize(n);

    auto& z = batch.states;
    for (std::size_t i = 0; i < chains; ++i)
        for (std::size_t d = 0; d < dim; ++d)
            z[i * dim + d] = streams[i].normal();

    const auto record = [&](int t_after) {
        if (!config.record_trajectory) return;
        batch.trajectory.emplace_back(
            t_after, std::vector<double>(z.begin(), z.begin() + dim));
    };
    record(T);

    std::vector<double> eps(n), noise(n);

    if (config.kind == SamplerKind::ancestral) {
        for (int t = T; t >= 1; --t) {
            compose_epsilon_batch(bundle, spec, z.data(), chains, t, eps.data());
            if (t > 1) {
                for (std::size_t i = 0; i < chains; ++i)
                    for (std::size_t d = 0; d < dim; ++d)
                        noise[i * dim + d] = streams[i].normal();
            }
            const DdpmCoeffs c = ddpm_coeffs(schedule, t, config.sigma_convention);
            kernels::active_ops().triad(z.data(), z.data(), c.z, eps.data(),
                                        c.eps, noise.data(), c.noise, n);
            record(t - 1);
        }
    } else {
        const std::vector<int> ts = ddim_timesteps(T, num_steps);
        for (std::size_t k = ts.size(); k-- > 0;) {
            const int t = ts[k];
            const int t_prev = k == 0 ? 0 : ts[k - 1];
            compose_epsilon_batch(bundle, spec, z.data(), chains, t, eps.data());
            const DdimCoeffs c = ddim_coeffs(schedule, t, t_prev);
            kernels::active_ops().axpby(z.data(), z.data(), c.z, eps.data(),
                                        c.eps, n);
            record(t_prev);
        }
    }
    return batch;
}

}  // namespace unite
