#include "unite/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "unite/kernels.hpp"

namespace unite {

namespace {

void check_t(const NoiseSchedule& s, int t, int lo) {
    if (t < lo || t > s.steps())
        throw std::invalid_argument("timestep " + std::to_string(t) +
                                    " outside " + std::to_string(lo) + ".." +
                                    std::to_string(s.steps()));
}

void check_same_size(std::span<const double> a, std::span<const double> b,
                     const char* what) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

// Cumulative product in one fixed order, accumulated in the widest native
// precision and rounded once per entry.
void finish_from_betas(std::vector<double>& betas, std::vector<double>& alphas,
                       std::vector<double>& alpha_bars) {
    const std::size_t n = betas.size();  // n == T+1, slot 0 unused
    alphas.assign(n, 1.0);
    alpha_bars.assign(n, 1.0);
    long double run = 1.0L;
    for (std::size_t t = 1; t < n; ++t) {
        alphas[t] = 1.0 - betas[t];
        run *= static_cast<long double>(alphas[t]);
        alpha_bars[t] = static_cast<double>(run);
    }
}

}  // namespace

double NoiseSchedule::beta(int t) const {
    check_t(*this, t, 1);
    return betas_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha(int t) const {
    check_t(*this, t, 1);
    return alphas_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha_bar(int t) const {
    check_t(*this, t, 0);
    return alpha_bars_[static_cast<std::size_t>(t)];
}

NoiseSchedule make_linear_schedule(int steps, double beta_start,
                                   double beta_end) {
    if (steps < 1) throw std::invalid_argument("schedule needs steps >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw std::invalid_argument(
            "linear schedule needs 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.steps_ = steps;
    s.kind_ = ScheduleKind::linear;
    s.betas_.assign(static_cast<std::size_t>(steps) + 1, 0.0);
    if (steps == 1) {
        s.betas_[1] = beta_start;
    } else {
        const double span = beta_end - beta_start;
        for (int t = 1; t <= steps; ++t)
            s.betas_[static_cast<std::size_t>(t)] =
                beta_start + span * static_cast<double>(t - 1) /
                                 static_cast<double>(steps - 1);
    }
    finish_from_betas(s.betas_, s.alphas_, s.alpha_bars_);
    return s;
}

NoiseSchedule make_cosine_schedule(int steps, double offset) {
    if (steps < 1) throw std::invalid_argument("schedule needs steps >= 1");
    if (!(offset > 0.0)) throw std::invalid_argument("cosine offset must be > 0");

    const auto profile = [&](int t) {
        const double u = (static_cast<double>(t) / steps + offset) /
                         (1.0 + offset) * (std::numbers::pi / 2.0);
        const double c = std::cos(u);
        return c * c;
    };

    NoiseSchedule s;
    s.steps_ = steps;
    s.kind_ = ScheduleKind::cosine;
    s.betas_.assign(static_cast<std::size_t>(steps) + 1, 0.0);
    const double f0 = profile(0);
    double prev = 1.0;  // f(0)/f(0)
    for (int t = 1; t <= steps; ++t) {
        const double cur = profile(t) / f0;
        double beta = 1.0 - cur / prev;
        if (beta > 0.999) beta = 0.999;
        s.betas_[static_cast<std::size_t>(t)] = beta;
        prev = cur;
    }
    finish_from_betas(s.betas_, s.alphas_, s.alpha_bars_);
    return s;
}

void q_sample(const NoiseSchedule& schedule, std::span<const double> z0, int t,
              std::span<const double> noise, std::span<double> out) {
    check_t(schedule, t, 1);
    check_same_size(z0, noise, "q_sample");
    check_same_size(z0, out, "q_sample");
    const double abar = schedule.alpha_bar(t);
    const double a = std::sqrt(abar);
    const double b = std::sqrt(1.0 - abar);
    kernels::active_ops().axpby(out.data(), z0.data(), a, noise.data(), b,
                                out.size());
}

std::vector<double> q_sample(const NoiseSchedule& schedule,
                             const std::vector<double>& z0, int t,
                             const std::vector<double>& noise) {
    std::vector<double> out(z0.size());
    q_sample(schedule, z0, t, noise, out);
    return out;
}

void epsilon_to_score(std::span<const double> eps,
                      const NoiseSchedule& schedule, int t,
                      std::span<double> out) {
    check_t(schedule, t, 1);
    check_same_size(eps, out, "epsilon_to_score");
    const double abar = schedule.alpha_bar(t);
    if (abar >= 1.0)
        throw std::invalid_argument(
            "epsilon_to_score: alpha_bar(t) == 1 has no defined score scale");
    const double inv = 1.0 / std::sqrt(1.0 - abar);
    kernels::active_ops().scale(out.data(), eps.data(), inv, out.size());
}

void score_to_epsilon(std::span<const double> score,
                      const NoiseSchedule& schedule, int t,
                      std::span<double> out) {
    check_t(schedule, t, 1);
    check_same_size(score, out, "score_to_epsilon");
    const double abar = schedule.alpha_bar(t);
    const double scale = std::sqrt(1.0 - abar);
    kernels::active_ops().scale(out.data(), score.data(), scale, out.size());
}

void signed_score_from_epsilon(std::span<const double> eps,
                               const NoiseSchedule& schedule, int t,
                               std::span<double> out) {
    check_t(schedule, t, 1);
    check_same_size(eps, out, "signed_score_from_epsilon");
    const double abar = schedule.alpha_bar(t);
    if (abar >= 1.0)
        throw std::invalid_argument(
            "signed_score_from_epsilon: alpha_bar(t) == 1");
    const double inv = -1.0 / std::sqrt(1.0 - abar);
    kernels::active_ops().scale(out.data(), eps.data(), inv, out.size());
}

int remap_timestep(const NoiseSchedule& master,
                   const NoiseSchedule& expert_schedule, int t_master) {
    check_t(master, t_master, 1);
    const double target = master.alpha_bar(t_master);
    int best_t = 1;
    double best_diff = std::abs(expert_schedule.alpha_bar(1) - target);
    for (int t = 2; t <= expert_schedule.steps(); ++t) {
        const double diff = std::abs(expert_schedule.alpha_bar(t) - target);
        if (diff < best_diff) {  // strict: ties keep the smaller t
            best_diff = diff;
            best_t = t;
        }
    }
    return best_t;
}

}  // namespace unite
