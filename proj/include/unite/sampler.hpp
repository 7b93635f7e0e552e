#pragma once

// Reverse-process drivers. Ancestral stepping follows
//   z_{t-1} = (z_t - (beta_t / sqrt(1 - abar_t)) * eps_c) / sqrt(1 - beta_t)
//             + sigma * eta,
// with sigma = sqrt(beta_t) by default; the sigma_squared convention scales
// the noise by beta_t instead (the two conventions differ in the literature
// and are both selectable; the default is the one whose single-expert chain
// reproduces the analytic target moments). No noise is added at t = 1.
// The deterministic stepper jumps along a strictly increasing timestep
// subsequence ending at T, reconstructing zhat0 from the epsilon prediction.
//
// Chains are independent: chain i draws from RngStream::substream(seed, i),
// so batched stepping is bit-identical to running each chain alone.

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "unite/compose.hpp"
#include "unite/rng.hpp"
#include "unite/schedule.hpp"

namespace unite {

enum class SamplerKind { ancestral, ddim };
enum class SigmaConvention { sigma, sigma_squared };

struct SamplerConfig {
    SamplerKind kind = SamplerKind::ancestral;
    // ddim: size of the timestep subsequence; ancestral: must equal T (0 means
    // "use every step")
    int num_steps = 0;
    std::uint64_t seed = 0;
    SigmaConvention sigma_convention = SigmaConvention::sigma;
    bool record_trajectory = false;
};

struct SampleBatch {
    std::size_t count = 0;
    int dim = 0;
    std::vector<double> states;  // count x dim, row-major, t=0 results
    std::uint64_t seed = 0;
    // chain 0's path when recorded: (timestep after the step, state)
    std::vector<std::pair<int, std::vector<double>>> trajectory;
};

// One ancestral step at timestep t; noise is ignored at t == 1.
void ddpm_step(std::span<const double> z_t, std::span<const double> eps_c,
               const NoiseSchedule& schedule, int t,
               std::span<const double> noise, SigmaConvention convention,
               std::span<double> out);

// One deterministic step from t to t_prev (t_prev == 0 ends the chain).
void ddim_step(std::span<const double> z_t, std::span<const double> eps_c,
               const NoiseSchedule& schedule, int t, int t_prev,
               std::span<double> out);

// zhat0 = (z_t - sqrt(1 - abar_t) * eps) / sqrt(abar_t)
void predict_z0(std::span<const double> z_t, std::span<const double> eps,
                const NoiseSchedule& schedule, int t, std::span<double> out);

// Uniform-stride subsequence of 1..T with num_steps entries ending at T.
std::vector<int> ddim_timesteps(int T, int num_steps);

SampleBatch sample(const ExpertBundle& bundle, const CompositionSpec& spec,
                   const SamplerConfig& config, std::size_t chains);

}  // namespace unite
