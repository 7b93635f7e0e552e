#pragma once

// Epsilon predictors. An Expert answers "what noise was injected" for a state
// at a timestep, under a condition or the null condition. Analytic experts
// (Gaussian, mixture) answer exactly from the closed form of their diffused
// marginal and double as ground truth; MlpExpert is a trained network.
// Experts are immutable once built.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "unite/schedule.hpp"

namespace unite {

class Condition {
public:
    enum class Kind { null_cond, label, embedding };

    Condition() = default;  // the null condition
    static const Condition& null();
    static Condition label(int id);  // id >= 0
    static Condition embedding(std::vector<double> values);

    Kind kind() const { return kind_; }
    bool is_null() const { return kind_ == Kind::null_cond; }
    int label_id() const;
    const std::vector<double>& embedding_values() const;

    bool operator==(const Condition& other) const;
    bool operator<(const Condition& other) const;  // table key ordering

    std::string describe() const;

private:
    Kind kind_ = Kind::null_cond;
    int label_ = -1;
    std::vector<double> embedding_;
};

class Expert {
public:
    virtual ~Expert() = default;
    virtual int dim() const = 0;

    // Epsilon prediction for a single state; out.size() == dim().
    virtual void epsilon(std::span<const double> z_t, const Condition& cond,
                         int t, const NoiseSchedule& schedule,
                         std::span<double> out) const = 0;

    std::vector<double> epsilon(const std::vector<double>& z_t,
                                const Condition& cond, int t,
                                const NoiseSchedule& schedule) const;

    // Row-per-state batch form; identical to per-row epsilon() calls.
    void epsilon_batch(const double* z_rows, std::size_t count,
                       const Condition& cond, int t,
                       const NoiseSchedule& schedule, double* out_rows) const;
};

// ---------------------------------------------------------------------------
// Closed-form marginals. Under the forward map the per-dimension marginal of
// N(mu, sigma^2) data at time t is N(sqrt(abar)*mu, abar*sigma^2 + 1 - abar);
// these return the epsilon whose score matches that marginal.

void gaussian_marginal_epsilon(std::span<const double> mu,
                               std::span<const double> sigma,
                               const NoiseSchedule& schedule, int t,
                               std::span<const double> z_t,
                               std::span<double> out);

struct GmmComponent {
    double weight;
    std::vector<double> mu;
    std::vector<double> sigma;
};

void gmm_marginal_epsilon(std::span<const GmmComponent> components,
                          const NoiseSchedule& schedule, int t,
                          std::span<const double> z_t, std::span<double> out);

// log of the diffused-marginal density at z_t (mixture of diagonal normals);
// shared by the grid tabulation and the finite-difference tests
double gmm_diffused_log_density(std::span<const GmmComponent> components,
                                const NoiseSchedule& schedule, int t,
                                std::span<const double> z_t);

// ---------------------------------------------------------------------------

struct GaussianParams {
    std::vector<double> mu;
    std::vector<double> sigma;  // per-dimension std dev, > 0
};

class GaussianExpert : public Expert {
public:
    // Table must contain a null-condition entry; all entries share dim and
    // have strictly positive sigma.
    GaussianExpert(int dim, std::map<Condition, GaussianParams> table);

    int dim() const override { return dim_; }
    void epsilon(std::span<const double> z_t, const Condition& cond, int t,
                 const NoiseSchedule& schedule,
                 std::span<double> out) const override;

    const GaussianParams& params(const Condition& cond) const;

private:
    int dim_;
    std::map<Condition, GaussianParams> table_;
};

class GmmExpert : public Expert {
public:
    // Per-condition component weights must sum to 1 (within 1e-12); null
    // entry required.
    GmmExpert(int dim, std::map<Condition, std::vector<GmmComponent>> table);

    int dim() const override { return dim_; }
    void epsilon(std::span<const double> z_t, const Condition& cond, int t,
                 const NoiseSchedule& schedule,
                 std::span<double> out) const override;

    const std::vector<GmmComponent>& components(const Condition& cond) const;

private:
    int dim_;
    std::map<Condition, std::vector<GmmComponent>> table_;
};

// ---------------------------------------------------------------------------
// MLP epsilon predictor: input is state (+) sinusoidal timestep embedding of
// t/T (+) condition embedding (a learned per-label row; a dedicated row for
// the null condition; raw values for embedding conditions). Hidden layers are
// tanh, output is linear with dim() outputs.

struct MlpArch {
    int state_dim = 0;
    int t_embed_dim = 16;    // even
    int cond_embed_dim = 0;  // may be 0 (unconditional-only net)
    std::vector<int> hidden_dims;
    std::vector<int> labels;  // sorted unique label ids with embedding rows

    int input_dim() const { return state_dim + t_embed_dim + cond_embed_dim; }
    std::vector<int> layer_dims() const;  // input, hidden..., state_dim
    std::size_t param_count() const;
    void validate() const;
};

// Flat parameter layout: per layer W (rows x cols, row-major) then bias; then
// one embedding row per label in arch.labels order; then the null row.
std::size_t mlp_weight_offset(const MlpArch& arch, int layer);
std::size_t mlp_bias_offset(const MlpArch& arch, int layer);
std::size_t mlp_label_row_offset(const MlpArch& arch, int label);
std::size_t mlp_null_row_offset(const MlpArch& arch);

void sinusoidal_time_embedding(double t_over_T, int dim, std::span<double> out);

void mlp_build_input(const MlpArch& arch, std::span<const double> params,
                     std::span<const double> z_t, const Condition& cond, int t,
                     const NoiseSchedule& schedule, std::span<double> out);

// Forward pass over a prebuilt input. When activations is non-null it
// receives the input followed by every layer's post-activation output
// (backprop consumes exactly this).
void mlp_forward(const MlpArch& arch, std::span<const double> params,
                 std::span<const double> input, std::span<double> out,
                 std::vector<double>* activations = nullptr);

class MlpExpert : public Expert {
public:
    MlpExpert(MlpArch arch, std::vector<double> params);

    int dim() const override { return arch_.state_dim; }
    void epsilon(std::span<const double> z_t, const Condition& cond, int t,
                 const NoiseSchedule& schedule,
                 std::span<double> out) const override;

    const MlpArch& arch() const { return arch_; }
    const std::vector<double>& params() const { return params_; }

private:
    MlpArch arch_;
    std::vector<double> params_;
};

}  // namespace unite
