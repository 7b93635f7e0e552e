#pragma once

// JSON run configuration: schedules, experts, composition, sampler, grid and
// output locations. Parsing is strict — unknown keys are rejected, referenced
// model files are loaded (and checksum-verified) up front, and every domain
// invariant is enforced before any work starts.

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "unite/compose.hpp"
#include "unite/density.hpp"
#include "unite/sampler.hpp"
#include "unite/trainer.hpp"

namespace unite {

// Configuration/usage problems map to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExpertDecl {
    enum class Type { gaussian, gmm, mlp };
    Type type = Type::gaussian;
    Condition condition;  // the bundle condition x_i
    std::shared_ptr<const NoiseSchedule> schedule;  // empty = master

    // analytic payloads kept for grid-oracle construction
    std::map<Condition, GaussianParams> gaussian_table;
    std::map<Condition, std::vector<GmmComponent>> gmm_table;
    std::string mlp_path;

    std::shared_ptr<const Expert> built;

    bool analytic() const { return type != Type::mlp; }
    // diffused-marginal inputs for the oracle (analytic experts only)
    DiagMixture conditional_mixture() const;
    DiagMixture unconditional_mixture() const;
};

struct TrainSection {
    bool present = false;
    DatasetSpec dataset;
    std::vector<int> hidden_dims;
    TrainConfig config;
};

struct RunConfig {
    std::shared_ptr<const NoiseSchedule> master;
    std::vector<ExpertDecl> experts;
    CompositionSpec composition;
    SamplerConfig sampler;
    std::size_t chains = 1000;
    GridSpec grid;
    std::string output_dir = "out";
    TrainSection train;

    ExpertBundle build_bundle() const;
    bool all_analytic() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text,
                           const std::string& base_dir);

// built-in two-Gaussian demonstration config (also what `verify` runs on)
std::string default_config_json();

}  // namespace unite
