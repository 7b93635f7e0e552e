#include "unite/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>

namespace unite {

std::vector<int> Dataset2D::label_set() const {
    std::set<int> s(labels.begin(), labels.end());
    return {s.begin(), s.end()};
}

Dataset2D generate_dataset(const DatasetSpec& spec) {
    if (spec.count == 0)
        throw std::invalid_argument("dataset needs at least one point");
    RngStream rng(spec.seed);
    Dataset2D ds;
    ds.count = spec.count;
    ds.points.resize(spec.count * 2);
    ds.labels.resize(spec.count);

    switch (spec.kind) {
        case DatasetKind::gaussian_blobs: {
            if (spec.blobs.empty())
                throw std::invalid_argument("gaussian_blobs needs blob specs");
            for (const auto& b : spec.blobs)
                if (!(b.sigma > 0.0))
                    throw std::invalid_argument("blob sigma must be > 0");
            for (std::size_t i = 0; i < spec.count; ++i) {
                const auto& b =
                    spec.blobs[static_cast<std::size_t>(rng.below(spec.blobs.size()))];
                ds.points[i * 2] = b.mu[0] + b.sigma * rng.normal();
                ds.points[i * 2 + 1] = b.mu[1] + b.sigma * rng.normal();
                ds.labels[i] = b.label;
            }
            break;
        }
        case DatasetKind::two_moons: {
            for (std::size_t i = 0; i < spec.count; ++i) {
                const bool upper = rng.below(2) == 0;
                const double theta = rng.uniform(0.0, std::numbers::pi);
                double x, y;
                if (upper) {
                    x = std::cos(theta);
                    y = std::sin(theta);
                } else {
                    x = 1.0 - std::cos(theta);
                    y = 0.5 - std::sin(theta);
                }
                ds.points[i * 2] = x + spec.moons_noise * rng.normal();
                ds.points[i * 2 + 1] = y + spec.moons_noise * rng.normal();
                ds.labels[i] = upper ? 0 : 1;
            }
            break;
        }
        case DatasetKind::checkerboard: {
            if (!(spec.checker_extent > 0.0))
                throw std::invalid_argument("checkerboard extent must be > 0");
            for (std::size_t i = 0; i < spec.count; ++i) {
                const double x = rng.uniform(-spec.checker_extent,
                                             spec.checker_extent);
                const double y = rng.uniform(-spec.checker_extent,
                                             spec.checker_extent);
                ds.points[i * 2] = x;
                ds.points[i * 2 + 1] = y;
                const long long parity = static_cast<long long>(std::floor(x)) +
                                         static_cast<long long>(std::floor(y));
                // cell colour is the label
                ds.labels[i] = static_cast<int>(((parity % 2) + 2) % 2);
            }
            break;
        }
    }
    return ds;
}

void TrainConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("learning rate must be > 0");
    if (!(p_uncond >= 0.0 && p_uncond < 1.0))
        throw std::invalid_argument("p_uncond must lie in [0, 1)");
}

DsmDraws draw_dsm_batch(RngStream& rng, std::size_t count, int dim, int T,
                        double p_uncond) {
    DsmDraws d;
    d.t.resize(count);
    d.noise.resize(count * static_cast<std::size_t>(dim));
    d.drop.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        d.t[i] = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(T)));
        for (int k = 0; k < dim; ++k)
            d.noise[i * static_cast<std::size_t>(dim) +
                    static_cast<std::size_t>(k)] = rng.normal();
        d.drop[i] = rng.uniform01() < p_uncond ? 1 : 0;
    }
    return d;
}

double dsm_loss_grad(const MlpArch& arch, std::span<const double> params,
                     std::span<const double> z0_rows,
                     std::span<const int> labels,
                     const NoiseSchedule& schedule, const DsmDraws& draws,
                     std::span<double> grad_out) {
    const auto dim = static_cast<std::size_t>(arch.state_dim);
    const std::size_t count = labels.size();
    if (count == 0) throw std::invalid_argument("dsm loss: empty batch");
    if (z0_rows.size() != count * dim)
        throw std::invalid_argument("dsm loss: batch size mismatch");
    if (draws.t.size() != count || draws.drop.size() != count ||
        draws.noise.size() != count * dim)
        throw std::invalid_argument("dsm loss: draw set size mismatch");
    if (grad_out.size() != arch.param_count())
        throw std::invalid_argument("dsm loss: gradient buffer size mismatch");

    std::fill(grad_out.begin(), grad_out.end(), 0.0);

    const auto dims = arch.layer_dims();
    const int layers = static_cast<int>(dims.size()) - 1;
    const double inv_scale = 1.0 / (static_cast<double>(count) * dim);

    std::vector<std::size_t> w_off(static_cast<std::size_t>(layers));
    std::vector<std::size_t> b_off(static_cast<std::size_t>(layers));
    std::vector<std::size_t> act_off(static_cast<std::size_t>(layers) + 1, 0);
    for (int l = 0; l < layers; ++l) {
        w_off[static_cast<std::size_t>(l)] = mlp_weight_offset(arch, l);
        b_off[static_cast<std::size_t>(l)] = mlp_bias_offset(arch, l);
        act_off[static_cast<std::size_t>(l) + 1] =
            act_off[static_cast<std::size_t>(l)] +
            static_cast<std::size_t>(dims[static_cast<std::size_t>(l)]);
    }

    std::vector<double> z_t(dim), input(static_cast<std::size_t>(dims.front()));
    std::vector<double> pred(dim), acts;
    std::vector<double> delta, delta_prev;
    double loss = 0.0;

    for (std::size_t i = 0; i < count; ++i) {
        const int t = draws.t[i];
        std::span<const double> z0 = z0_rows.subspan(i * dim, dim);
        std::span<const double> eps = {draws.noise.data() + i * dim, dim};
        q_sample(schedule, z0, t, eps, z_t);

        const Condition& cond = draws.drop[i]
                                    ? Condition::null()
                                    : Condition::label(labels[i]);
        mlp_build_input(arch, params, z_t, cond, t, schedule, input);
        mlp_forward(arch, params, input, pred, &acts);

        delta.assign(dim, 0.0);
        for (std::size_t k = 0; k < dim; ++k) {
            const double r = pred[k] - eps[k];
            loss += r * r;
            delta[k] = 2.0 * r * inv_scale;
        }

        for (int l = layers - 1; l >= 0; --l) {
            const int in_dim = dims[static_cast<std::size_t>(l)];
            const int out_dim = dims[static_cast<std::size_t>(l) + 1];
            const double* layer_in = acts.data() + act_off[static_cast<std::size_t>(l)];
            const double* W = params.data() + w_off[static_cast<std::size_t>(l)];
            double* gW = grad_out.data() + w_off[static_cast<std::size_t>(l)];
            double* gb = grad_out.data() + b_off[static_cast<std::size_t>(l)];

            delta_prev.assign(static_cast<std::size_t>(in_dim), 0.0);
            for (int r = 0; r < out_dim; ++r) {
                const double dr = delta[static_cast<std::size_t>(r)];
                gb[r] += dr;
                const double* wrow = W + static_cast<std::size_t>(r) * in_dim;
                double* grow = gW + static_cast<std::size_t>(r) * in_dim;
                for (int c = 0; c < in_dim; ++c) {
                    grow[c] += dr * layer_in[c];
                    delta_prev[static_cast<std::size_t>(c)] += dr * wrow[c];
                }
            }
            if (l > 0) {
                // through the tanh of the layer below
                const double* below =
                    acts.data() + act_off[static_cast<std::size_t>(l)];
                delta.assign(static_cast<std::size_t>(in_dim), 0.0);
                for (int c = 0; c < in_dim; ++c)
                    delta[static_cast<std::size_t>(c)] =
                        delta_prev[static_cast<std::size_t>(c)] *
                        (1.0 - below[c] * below[c]);
            } else {
                // gradient w.r.t. the input: only the condition-embedding
                // slice is trainable
                if (arch.cond_embed_dim > 0 &&
                    cond.kind() != Condition::Kind::embedding) {
                    const std::size_t row_off =
                        cond.is_null()
                            ? mlp_null_row_offset(arch)
                            : mlp_label_row_offset(arch, cond.label_id());
                    const std::size_t base = static_cast<std::size_t>(
                        arch.state_dim + arch.t_embed_dim);
                    for (int c = 0; c < arch.cond_embed_dim; ++c)
                        grad_out[row_off + static_cast<std::size_t>(c)] +=
                            delta_prev[base + static_cast<std::size_t>(c)];
                }
            }
        }
    }
    return loss * inv_scale;
}

LossGrad dsm_loss(const MlpExpert& expert, std::span<const double> z0_rows,
                  std::span<const int> labels, const NoiseSchedule& schedule,
                  const DsmDraws& draws) {
    LossGrad lg;
    lg.gradients.resize(expert.arch().param_count());
    lg.loss = dsm_loss_grad(expert.arch(), expert.params(), z0_rows, labels,
                            schedule, draws, lg.gradients);
    return lg;
}

MlpArch make_mlp_arch(int state_dim, std::vector<int> hidden_dims,
                      std::vector<int> labels, int t_embed_dim) {
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    MlpArch arch;
    arch.state_dim = state_dim;
    arch.t_embed_dim = t_embed_dim;
    arch.cond_embed_dim = std::max<int>(1, static_cast<int>(labels.size()));
    arch.hidden_dims = std::move(hidden_dims);
    arch.labels = std::move(labels);
    arch.validate();
    return arch;
}

std::vector<double> init_mlp_params(const MlpArch& arch, std::uint64_t seed) {
    arch.validate();
    std::vector<double> params(arch.param_count(), 0.0);
    RngStream rng(seed);
    const auto dims = arch.layer_dims();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
        double* W = params.data() + mlp_weight_offset(arch, static_cast<int>(l));
        const std::size_t n =
            static_cast<std::size_t>(dims[l + 1]) * static_cast<std::size_t>(dims[l]);
        for (std::size_t k = 0; k < n; ++k) W[k] = rng.uniform(-bound, bound);
        // biases start at zero
    }
    // one-hot label rows, zero null row
    for (std::size_t j = 0; j < arch.labels.size(); ++j) {
        double* row = params.data() +
                      mlp_label_row_offset(arch, arch.labels[j]);
        if (static_cast<int>(j) < arch.cond_embed_dim) row[j] = 1.0;
    }
    return params;
}

TrainResult train_expert(const Dataset2D& dataset,
                         const std::vector<int>& hidden_dims,
                         const NoiseSchedule& schedule,
                         const TrainConfig& config) {
    config.validate();
    if (dataset.count == 0) throw std::invalid_argument("empty dataset");

    const MlpArch arch = make_mlp_arch(2, hidden_dims, dataset.label_set());
    std::vector<double> params = init_mlp_params(arch, config.seed);
    std::vector<double> grad(arch.param_count());

    RngStream rng(config.seed ^ 0x747261696E6572ull);  // training stream
    std::vector<std::size_t> order(dataset.count);
    std::vector<double> batch_pts;
    std::vector<int> batch_labels;
    std::vector<double> epoch_loss;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1],
                      order[static_cast<std::size_t>(rng.below(i))]);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < dataset.count;
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop =
                std::min(dataset.count,
                         start + static_cast<std::size_t>(config.batch_size));
            const std::size_t bsz = stop - start;
            batch_pts.resize(bsz * 2);
            batch_labels.resize(bsz);
            for (std::size_t i = 0; i < bsz; ++i) {
                const std::size_t src = order[start + i];
                batch_pts[i * 2] = dataset.points[src * 2];
                batch_pts[i * 2 + 1] = dataset.points[src * 2 + 1];
                batch_labels[i] = dataset.labels[src];
            }
            const DsmDraws draws = draw_dsm_batch(rng, bsz, 2, schedule.steps(),
                                                  config.p_uncond);
            const double loss = dsm_loss_grad(arch, params, batch_pts,
                                              batch_labels, schedule, draws,
                                              grad);
            if (!std::isfinite(loss))
                throw std::runtime_error(
                    "training diverged: non-finite loss at epoch " +
                    std::to_string(epoch));
            for (std::size_t k = 0; k < params.size(); ++k)
                params[k] -= config.learning_rate * grad[k];
            loss_sum += loss * static_cast<double>(bsz);
            seen += bsz;
        }
        epoch_loss.push_back(loss_sum / static_cast<double>(seen));
    }

    return TrainResult{MlpExpert(arch, std::move(params)),
                       std::move(epoch_loss)};
}

}  // namespace unite
