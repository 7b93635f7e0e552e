#pragma once

// Parameter sweeps over a reliability factor or a condition weight, one
// sampling run per value. With shared_noise every cell uses the master seed
// (identical initial draws and, for the ancestral stepper, identical noise
// sequences); otherwise each cell gets a derived sub-seed.

#include <cstdint>
#include <string>
#include <vector>

#include "unite/run_config.hpp"
#include "unite/sampler.hpp"

namespace unite {

enum class SweepParam { reliability, weight };

struct SweepRequest {
    SweepParam param = SweepParam::reliability;
    int index = 0;
    std::vector<double> values;
    bool shared_noise = false;
};

struct SweepCell {
    double value = 0.0;
    bool skipped = false;
    std::string skip_reason;
    std::uint64_t seed = 0;
    CompositionSpec spec;        // the cell's effective composition
    std::vector<double> mean;
    std::vector<double> stddev;
    double tv_to_product = 0.0;  // NaN when no analytic oracle applies
    SampleBatch batch;
};

// Reliability sweeps set a[index] = v and rescale the other factors to keep
// the total at 1 (evenly when they were all zero). Weight sweeps set
// w[index] = v directly. Cells whose spec violates an invariant are skipped
// and recorded.
std::vector<SweepCell> run_sweep(const RunConfig& cfg, const SweepRequest& req);

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index);

}  // namespace unite
