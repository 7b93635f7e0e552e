#pragma once

// Forward-process noise schedules. Timesteps run 1..T; index 0 holds the
// conceptual no-noise point (alpha_bar = 1) so t=1 steps are well defined.
// Schedules are immutable after construction and safe to share.

#include <span>
#include <vector>

namespace unite {

enum class ScheduleKind { linear, cosine };

class NoiseSchedule {
public:
    int steps() const { return steps_; }
    ScheduleKind kind() const { return kind_; }

    double beta(int t) const;       // t in 1..T
    double alpha(int t) const;      // 1 - beta(t), t in 1..T
    double alpha_bar(int t) const;  // t in 0..T, alpha_bar(0) == 1

    // whole array including the t=0 slot, for oracles and remapping
    std::span<const double> alpha_bars() const { return alpha_bars_; }

private:
    friend NoiseSchedule make_linear_schedule(int, double, double);
    friend NoiseSchedule make_cosine_schedule(int, double);
    NoiseSchedule() = default;

    int steps_ = 0;
    ScheduleKind kind_ = ScheduleKind::linear;
    std::vector<double> betas_;       // [0] unused
    std::vector<double> alphas_;      // [0] == 1
    std::vector<double> alpha_bars_;  // [0] == 1, strictly decreasing
};

// betas linearly spaced over [beta_start, beta_end]; requires T >= 1 and
// 0 < beta_start <= beta_end < 1.
NoiseSchedule make_linear_schedule(int steps, double beta_start,
                                   double beta_end);

// Squared-cosine alpha_bar profile f(t)/f(0) with
// f(t) = cos^2(((t/T + offset)/(1 + offset)) * pi/2); betas are back-derived
// as 1 - abar_t/abar_{t-1} and clamped to <= 0.999, then alpha_bar is the
// running product of the clamped alphas.
NoiseSchedule make_cosine_schedule(int steps, double offset = 0.008);

// z_t = sqrt(abar_t) * z0 + sqrt(1 - abar_t) * noise
void q_sample(const NoiseSchedule& schedule, std::span<const double> z0, int t,
              std::span<const double> noise, std::span<double> out);
std::vector<double> q_sample(const NoiseSchedule& schedule,
                             const std::vector<double>& z0, int t,
                             const std::vector<double>& noise);

// Epsilon/score conversions. epsilon_to_score follows the engine's own sign
// convention (score = eps / sqrt(1 - abar_t)), which is what the reverse step
// consumes; signed_score_from_epsilon gives the mathematical gradient of the
// log density (= -eps / sqrt(1 - abar_t)) for comparisons against
// finite-difference ground truth.
void epsilon_to_score(std::span<const double> eps, const NoiseSchedule& schedule,
                      int t, std::span<double> out);
void score_to_epsilon(std::span<const double> score,
                      const NoiseSchedule& schedule, int t,
                      std::span<double> out);
void signed_score_from_epsilon(std::span<const double> eps,
                               const NoiseSchedule& schedule, int t,
                               std::span<double> out);

// Expert-schedule timestep with the nearest alpha_bar to the master's at
// t_master; ties resolve toward the smaller (less noisy) timestep.
int remap_timestep(const NoiseSchedule& master,
                   const NoiseSchedule& expert_schedule, int t_master);

}  // namespace unite
