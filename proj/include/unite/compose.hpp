#pragma once

// Combining several experts' predictions into one effective epsilon.
//
// With conditional predictions e_i = eps_i(z_t, x_i, t) and the reliability
// blend  ubar = sum_j a_j * eps_j(z_t, null, t)  (sum a_j = 1), the weighted
// combination is
//
//     eps_c = sum_i w_i * e_i  -  (sum_i w_i - 1) * ubar,      w_i >= 1,
//
// which reduces to plain classifier-free guidance for a single expert and to
// the unweighted form  ubar + sum_i (e_i - ubar)  at w = 1. The product-form
// variant  ubar + sum_i beta_i * (e_i - ubar)  is the same map written with
// per-expert exponents; both are provided and equivalence-tested.
//
// Each expert may carry its own noise schedule; queries go through the
// nearest-alpha_bar timestep remap against the master schedule.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "unite/expert.hpp"
#include "unite/schedule.hpp"

namespace unite {

struct CompositionSpec {
    std::vector<double> a;  // reliability factors, >= 0, sum to 1
    std::vector<double> w;  // condition weights, >= 1 unless the override is set
    bool allow_w_below_one = false;

    int experts() const { return static_cast<int>(a.size()); }
    void validate() const;  // throws std::invalid_argument
};

struct BundleEntry {
    std::shared_ptr<const Expert> expert;
    Condition condition;
    // empty = master schedule
    std::shared_ptr<const NoiseSchedule> schedule;
};

class ExpertBundle {
public:
    ExpertBundle(std::shared_ptr<const NoiseSchedule> master,
                 std::vector<BundleEntry> entries);

    int size() const { return static_cast<int>(entries_.size()); }
    int dim() const { return dim_; }
    const NoiseSchedule& master_schedule() const { return *master_; }
    std::shared_ptr<const NoiseSchedule> master_schedule_ptr() const {
        return master_;
    }
    const BundleEntry& entry(int i) const {
        return entries_[static_cast<std::size_t>(i)];
    }
    const NoiseSchedule& schedule_of(int i) const;

    // precomputed nearest-alpha_bar remap of a master timestep
    int remapped_t(int i, int t_master) const;

    // expert i's prediction at its remapped timestep, batch of `count` rows
    void conditional_epsilon(int i, const double* z_rows, std::size_t count,
                             int t_master, double* out_rows) const;
    void unconditional_epsilon(int i, const double* z_rows, std::size_t count,
                               int t_master, double* out_rows) const;

private:
    std::shared_ptr<const NoiseSchedule> master_;
    std::vector<BundleEntry> entries_;
    std::vector<std::vector<int>> remap_;  // [i][t_master], identity when own
    int dim_ = 0;
};

// ubar = sum_j a_j * eps_j(null); experts with a_j == 0 are not queried
void unconditional_blend(const ExpertBundle& bundle, std::span<const double> a,
                         const double* z_rows, std::size_t count, int t_master,
                         double* out_rows);

// Weighted combination above. Single-state and batch forms give bit-identical
// results row by row.
void compose_epsilon(const ExpertBundle& bundle, const CompositionSpec& spec,
                     std::span<const double> z_t, int t, std::span<double> out);
void compose_epsilon_batch(const ExpertBundle& bundle,
                           const CompositionSpec& spec, const double* z_rows,
                           std::size_t count, int t, double* out_rows);

// Product-form combination with explicit exponents:
//   eps_c = ubar + sum_i beta_i * (e_i - ubar)
void compose_epsilon_gpoe(const ExpertBundle& bundle, std::span<const double> a,
                          std::span<const double> beta_exponents,
                          std::span<const double> z_t, int t,
                          std::span<double> out);

// Classifier-free guidance on one expert:
//   eps_hat = (1 + w) * eps(z, c, t) - w * eps(z, null, t),  w >= 0
void classifier_free_epsilon(const Expert& expert, std::span<const double> z_t,
                             const Condition& cond, int t, double w,
                             const NoiseSchedule& schedule,
                             std::span<double> out);

}  // namespace unite
