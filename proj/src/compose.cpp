#include "unite/compose.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "unite/kernels.hpp"

namespace unite {

void CompositionSpec::validate() const {
    if (a.empty() || a.size() != w.size())
        throw std::invalid_argument(
            "a and w must be non-empty and the same length");
    double sum = 0.0;
    for (double ai : a) {
        if (!(ai >= 0.0))
            throw std::invalid_argument(
                "reliability factors must satisfy a_i >= 0");
        sum += ai;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument(
            "reliability factors must sum to 1 (got " +
            std::to_string(sum) + ")");
    if (!allow_w_below_one)
        for (double wi : w)
            if (!(wi >= 1.0))
                throw std::invalid_argument(
                    "condition weights must satisfy w_i >= 1 "
                    "(set allow_w_below_one to explore smaller values)");
}

ExpertBundle::ExpertBundle(std::shared_ptr<const NoiseSchedule> master,
                           std::vector<BundleEntry> entries)
    : master_(std::move(master)), entries_(std::move(entries)) {
    if (!master_) throw std::invalid_argument("bundle needs a master schedule");
    if (entries_.empty())
        throw std::invalid_argument("bundle needs at least one expert");
    dim_ = entries_.front().expert->dim();
    for (const auto& e : entries_) {
        if (!e.expert) throw std::invalid_argument("bundle entry without expert");
        if (e.expert->dim() != dim_)
            throw std::invalid_argument("bundle experts disagree on dimension");
    }
    remap_.resize(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& sched = entries_[i].schedule;
        if (!sched) continue;  // master schedule, identity map
        auto& table = remap_[i];
        table.assign(static_cast<std::size_t>(master_->steps()) + 1, 0);
        for (int t = 1; t <= master_->steps(); ++t)
            table[static_cast<std::size_t>(t)] =
                remap_timestep(*master_, *sched, t);
    }
}

const NoiseSchedule& ExpertBundle::schedule_of(int i) const {
    const auto& own = entries_[static_cast<std::size_t>(i)].schedule;
    return own ? *own : *master_;
}

int ExpertBundle::remapped_t(int i, int t_master) const {
    const auto& table = remap_[static_cast<std::size_t>(i)];
    if (table.empty()) return t_master;
    return table[static_cast<std::size_t>(t_master)];
}

void ExpertBundle::conditional_epsilon(int i, const double* z_rows,
                                       std::size_t count, int t_master,
                                       double* out_rows) const {
    const auto& e = entries_[static_cast<std::size_t>(i)];
    e.expert->epsilon_batch(z_rows, count, e.condition, remapped_t(i, t_master),
                            schedule_of(i), out_rows);
}

void ExpertBundle::unconditional_epsilon(int i, const double* z_rows,
                                         std::size_t count, int t_master,
                                         double* out_rows) const {
    const auto& e = entries_[static_cast<std::size_t>(i)];
    e.expert->epsilon_batch(z_rows, count, Condition::null(),
                            remapped_t(i, t_master), schedule_of(i), out_rows);
}

void unconditional_blend(const ExpertBundle& bundle, std::span<const double> a,
                         const double* z_rows, std::size_t count, int t_master,
                         double* out_rows) {
    if (a.size() != static_cast<std::size_t>(bundle.size()))
        throw std::invalid_argument("blend: one reliability factor per expert");
    const std::size_t n = count * static_cast<std::size_t>(bundle.dim());
    std::memset(out_rows, 0, n * sizeof(double));
    std::vector<double> tmp(n);
    const auto& ops = kernels::active_ops();
    for (int j = 0; j < bundle.size(); ++j) {
        const double aj = a[static_cast<std::size_t>(j)];
        if (aj == 0.0) continue;  // zero coefficient, query never affects out
        bundle.unconditional_epsilon(j, z_rows, count, t_master, tmp.data());
        ops.axpy(out_rows, tmp.data(), aj, n);
    }
}

void compose_epsilon_batch(const ExpertBundle& bundle,
                           const CompositionSpec& spec, const double* z_rows,
                           std::size_t count, int t, double* out_rows) {
    spec.validate();
    if (spec.experts() != bundle.size())
        throw std::invalid_argument("composition spec and bundle disagree on N");

    const std::size_t n = count * static_cast<std::size_t>(bundle.dim());
    const auto& ops = kernels::active_ops();

    std::memset(out_rows, 0, n * sizeof(double));
    std::vector<double> tmp(n);
    double wsum = 0.0;
    for (int i = 0; i < bundle.size(); ++i) {
        const double wi = spec.w[static_cast<std::size_t>(i)];
        wsum += wi;
        bundle.conditional_epsilon(i, z_rows, count, t, tmp.data());
        ops.axpy(out_rows, tmp.data(), wi, n);
    }

    // The blend enters with coefficient (sum w - 1); skip the queries when it
    // cannot contribute.
    if (wsum != 1.0) {
        std::vector<double> blend(n);
        unconditional_blend(bundle, spec.a, z_rows, count, t, blend.data());
        ops.axpy(out_rows, blend.data(), -(wsum - 1.0), n);
    }
}

void compose_epsilon(const ExpertBundle& bundle, const CompositionSpec& spec,
                     std::span<const double> z_t, int t,
                     std::span<double> out) {
    if (z_t.size() != static_cast<std::size_t>(bundle.dim()) ||
        out.size() != z_t.size())
        throw std::invalid_argument("compose_epsilon: dimension mismatch");
    compose_epsilon_batch(bundle, spec, z_t.data(), 1, t, out.data());
}

void compose_epsilon_gpoe(const ExpertBundle& bundle, std::span<const double> a,
                          std::span<const double> beta_exponents,
                          std::span<const double> z_t, int t,
                          std::span<double> out) {
    if (a.size() != static_cast<std::size_t>(bundle.size()) ||
        beta_exponents.size() != a.size())
        throw std::invalid_argument("gpoe: need one a and one beta per expert");
    double asum = 0.0;
    for (double ai : a) {
        if (!(ai >= 0.0)) throw std::invalid_argument("gpoe: a_i >= 0");
        asum += ai;
    }
    if (std::abs(asum - 1.0) > 1e-12)
        throw std::invalid_argument("gpoe: reliability factors must sum to 1");
    for (double b : beta_exponents)
        if (!(b > 0.0)) throw std::invalid_argument("gpoe: beta_i > 0");
    if (z_t.size() != static_cast<std::size_t>(bundle.dim()) ||
        out.size() != z_t.size())
        throw std::invalid_argument("gpoe: dimension mismatch");

    const std::size_t n = z_t.size();
    const auto& ops = kernels::active_ops();

    std::vector<double> blend(n);
    unconditional_blend(bundle, a, z_t.data(), 1, t, blend.data());

    std::copy(blend.begin(), blend.end(), out.begin());
    std::vector<double> cond(n), diff(n);
    for (int i = 0; i < bundle.size(); ++i) {
        bundle.conditional_epsilon(i, z_t.data(), 1, t, cond.data());
        ops.axpby(diff.data(), cond.data(), 1.0, blend.data(), -1.0, n);
        ops.axpy(out.data(), diff.data(),
                 beta_exponents[static_cast<std::size_t>(i)], n);
    }
}

void classifier_free_epsilon(const Expert& expert, std::span<const double> z_t,
                             const Condition& cond, int t, double w,
                             const NoiseSchedule& schedule,
                             std::span<double> out) {
    if (!(w >= 0.0))
        throw std::invalid_argument("classifier-free guidance needs w >= 0");
    if (out.size() != z_t.size() ||
        z_t.size() != static_cast<std::size_t>(expert.dim()))
        throw std::invalid_argument("classifier_free_epsilon: dimension mismatch");
    const std::size_t n = z_t.size();
    std::vector<double> cond_eps(n), uncond_eps(n);
    expert.epsilon(z_t, cond, t, schedule, cond_eps);
    expert.epsilon(z_t, Condition::null(), t, schedule, uncond_eps);
    kernels::active_ops().axpby(out.data(), cond_eps.data(), 1.0 + w,
                                uncond_eps.data(), -w, n);
}

}  // namespace unite
