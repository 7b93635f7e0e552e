#pragma once

// Denoising-score-matching trainer for MlpExpert on 2-D toy datasets. The
// objective regresses the network output onto the injected forward noise at
// uniformly drawn timesteps; labels are dropped to the null condition with
// probability p_uncond so the trained expert can answer unconditional
// queries. Plain SGD, single-threaded, bitwise reproducible from the seed.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "unite/expert.hpp"
#include "unite/rng.hpp"
#include "unite/schedule.hpp"

namespace unite {

enum class DatasetKind { gaussian_blobs, two_moons, checkerboard };

struct BlobSpec {
    int label = 0;
    std::array<double, 2> mu{0.0, 0.0};
    double sigma = 1.0;
};

struct DatasetSpec {
    DatasetKind kind = DatasetKind::gaussian_blobs;
    std::vector<BlobSpec> blobs;   // gaussian_blobs
    double moons_noise = 0.05;     // two_moons
    double checker_extent = 2.0;   // checkerboard over [-e, e]^2
    std::size_t count = 0;
    std::uint64_t seed = 0;
};

struct Dataset2D {
    std::size_t count = 0;
    std::vector<double> points;  // count x 2, row-major
    std::vector<int> labels;     // one label per point

    std::vector<int> label_set() const;  // sorted unique
};

Dataset2D generate_dataset(const DatasetSpec& spec);

struct TrainConfig {
    int epochs = 30;
    int batch_size = 128;
    double learning_rate = 1e-2;
    std::uint64_t seed = 0;
    double p_uncond = 0.1;  // probability of training an example as null

    void validate() const;
};

// Per-example draws for one loss evaluation, pre-drawn so the evaluation
// itself is a pure function.
struct DsmDraws {
    std::vector<int> t;             // uniform in 1..T, one per example
    std::vector<double> noise;      // count x dim standard normals
    std::vector<std::uint8_t> drop; // 1 = use the null condition
};

DsmDraws draw_dsm_batch(RngStream& rng, std::size_t count, int dim, int T,
                        double p_uncond);

// Mean squared error per coordinate between predicted and injected noise,
// with exact reverse-mode gradients over the flat parameter vector
// (grad_out.size() == arch.param_count()). Returns the loss.
double dsm_loss_grad(const MlpArch& arch, std::span<const double> params,
                     std::span<const double> z0_rows,
                     std::span<const int> labels,
                     const NoiseSchedule& schedule, const DsmDraws& draws,
                     std::span<double> grad_out);

struct LossGrad {
    double loss = 0.0;
    std::vector<double> gradients;
};

LossGrad dsm_loss(const MlpExpert& expert, std::span<const double> z0_rows,
                  std::span<const int> labels, const NoiseSchedule& schedule,
                  const DsmDraws& draws);

// One-hot label rows, zero null row, weights uniform in +-1/sqrt(fan_in).
MlpArch make_mlp_arch(int state_dim, std::vector<int> hidden_dims,
                      std::vector<int> labels, int t_embed_dim = 16);
std::vector<double> init_mlp_params(const MlpArch& arch, std::uint64_t seed);

struct TrainResult {
    MlpExpert expert;
    std::vector<double> epoch_loss;  // mean loss per epoch
};

// Throws std::runtime_error when the loss goes non-finite.
TrainResult train_expert(const Dataset2D& dataset,
                         const std::vector<int>& hidden_dims,
                         const NoiseSchedule& schedule,
                         const TrainConfig& config);

}  // namespace unite
