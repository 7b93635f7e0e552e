#include "unite/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "unite/compose.hpp"
#include "unite/density.hpp"
#include "unite/kernels.hpp"
#include "unite/rng.hpp"
#include "unite/sampler.hpp"
#include "unite/schedule.hpp"
#include "unite/sweep.hpp"
#include "unite/trainer.hpp"

namespace unite {

namespace {

// |x - y| relative to the term magnitude of the combination that produced
// them; identities are judged against their own conditioning, not against
// accidental zeros of the output.
double identity_error(double x, double y, double term_scale) {
    const double denom = std::max({std::abs(x), std::abs(y), term_scale, 1e-300});
    return std::abs(x - y) / denom;
}

std::shared_ptr<GaussianExpert> random_gaussian_expert(RngStream& rng,
                                                       int dim) {
    const auto mk = [&](double lo_mu, double hi_mu) {
        GaussianParams p;
        for (int d = 0; d < dim; ++d) {
            p.mu.push_back(rng.uniform(lo_mu, hi_mu));
            p.sigma.push_back(rng.uniform(0.4, 2.0));
        }
        return p;
    };
    std::map<Condition, GaussianParams> table;
    table.emplace(Condition::null(), mk(-1.0, 1.0));
    table.emplace(Condition::label(0), mk(-2.0, 2.0));
    return std::make_shared<GaussianExpert>(dim, std::move(table));
}

ExpertBundle random_bundle(RngStream& rng,
                           std::shared_ptr<const NoiseSchedule> master, int n,
                           int dim) {
    std::vector<BundleEntry> entries;
    for (int i = 0; i < n; ++i)
        entries.push_back(
            {random_gaussian_expert(rng, dim), Condition::label(0), nullptr});
    return ExpertBundle(std::move(master), std::move(entries));
}

CheckResult check_kernel_variants() {
    CheckResult r{"kernel_variants_bitwise_equal", false, 0.0, 0.0,
                  "max |simd - scalar| over mixed-size buffers"};
    RngStream rng(0xC0FFEE);
    const auto& scalar = kernels::scalar_ops();
    double worst = 0.0;
    for (std::size_t n : {1ul, 3ul, 4ul, 7ul, 64ul, 1037ul}) {
        std::vector<double> x(n), y(n), z(n);
        for (auto& v : x) v = rng.normal();
        for (auto& v : y) v = rng.normal();
        for (auto& v : z) v = rng.normal();
        const double a = rng.normal(), b = rng.normal(), c = rng.normal();
        for (const char* name : {"avx2", "neon"}) {
            const kernels::Ops* ops =
                std::string(name) == "avx2" ? kernels::avx2_ops()
                                            : kernels::neon_ops();
            if (!ops) continue;
            std::vector<double> got(n), want(n);
            ops->scale(got.data(), x.data(), a, n);
            scalar.scale(want.data(), x.data(), a, n);
            for (std::size_t i = 0; i < n; ++i)
                worst = std::max(worst, std::abs(got[i] - want[i]));
            ops->axpby(got.data(), x.data(), a, y.data(), b, n);
            scalar.axpby(want.data(), x.data(), a, y.data(), b, n);
            for (std::size_t i = 0; i < n; ++i)
                worst = std::max(worst, std::abs(got[i] - want[i]));
            got = z;
            want = z;
            ops->axpy(got.data(), x.data(), a, n);
            scalar.axpy(want.data(), x.data(), a, n);
            for (std::size_t i = 0; i < n; ++i)
                worst = std::max(worst, std::abs(got[i] - want[i]));
            ops->triad(got.data(), x.data(), a, y.data(), b, z.data(), c, n);
            scalar.triad(want.data(), x.data(), a, y.data(), b, z.data(), c, n);
            for (std::size_t i = 0; i < n; ++i)
                worst = std::max(worst, std::abs(got[i] - want[i]));
        }
    }
    r.measured = worst;
    r.pass = worst == 0.0;
    return r;
}

CheckResult check_linear_endpoint() {
    CheckResult r{"schedule_linear_alpha_bar_T", false, 0.0, 1e-6,
                  "|alpha_bar(1000) - 4.0e-5|, linear 1e-4..0.02"};
    const NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
    r.measured = std::abs(s.alpha_bar(1000) - 4.0e-5);
    r.pass = r.measured <= r.threshold;
    return r;
}

CheckResult check_cosine_consistency() {
    CheckResult r{"schedule_cosine_self_consistency", false, 0.0, 1e-12,
                  "max rel diff, stored alpha_bar vs recomputed product"};
    double worst = 0.0;
    for (int T : {10, 100, 1000}) {
        const NoiseSchedule s = make_cosine_schedule(T, 0.008);
        double run = 1.0;
        for (int t = 1; t <= T; ++t) {
            run *= 1.0 - s.beta(t);
            worst = std::max(worst, std::abs(run - s.alpha_bar(t)) /
                                        std::max(run, 1e-300));
        }
    }
    r.measured = worst;
    r.pass = worst <= r.threshold;
    return r;
}

CheckResult check_cfg_equivalence() {
    CheckResult r{"cfg_equals_single_expert_composition", false, 0.0, 1e-14,
                  "max identity error over 1000 randomized inputs"};
    RngStream rng(11);
    auto master = std::make_shared<NoiseSchedule>(
        make_linear_schedule(100, 1e-4, 0.05));
    const double ws[] = {0.0, 0.3, 1.0, 2.5, 5.0};
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int dim = trial % 2 == 0 ? 1 : 2;
        auto expert = random_gaussian_expert(rng, dim);
        const double w = ws[trial % 5];
        const int t = 1 + static_cast<int>(rng.below(100));
        std::vector<double> z(static_cast<std::size_t>(dim));
        for (auto& v : z) v = 2.0 * rng.normal();

        std::vector<double> via_cfg(z.size());
        classifier_free_epsilon(*expert, z, Condition::label(0), t, w, *master,
                                via_cfg);

        ExpertBundle bundle(master, {{expert, Condition::label(0), nullptr}});
        CompositionSpec spec;
        spec.a = {1.0};
        spec.w = {1.0 + w};
        std::vector<double> via_compose(z.size());
        compose_epsilon(bundle, spec, z, t, via_compose);

        std::vector<double> ec(z.size()), ephi(z.size());
        expert->epsilon(z, Condition::label(0), t, *master, ec);
        expert->epsilon(z, Condition::null(), t, *master, ephi);
        for (std::size_t d = 0; d < z.size(); ++d) {
            const double scale =
                (1.0 + w) * std::abs(ec[d]) + w * std::abs(ephi[d]);
            worst = std::max(
                worst, identity_error(via_cfg[d], via_compose[d], scale));
        }
    }
    r.measured = worst;
    r.pass = worst <= r.threshold;
    return r;
}

double gpoe_identity_worst(bool unit_weights) {
    RngStream rng(unit_weights ? 23 : 17);
    auto master = std::make_shared<NoiseSchedule>(
        make_linear_schedule(60, 1e-4, 0.05));
    const int dims[] = {1, 2, 8};
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(4));
        const int dim = dims[trial % 3];
        ExpertBundle bundle = random_bundle(rng, master, n, dim);

        CompositionSpec spec;
        spec.a.resize(static_cast<std::size_t>(n));
        spec.w.resize(static_cast<std::size_t>(n));
        double asum = 0.0;
        for (auto& ai : spec.a) asum += ai = rng.uniform(0.05, 1.0);
        for (auto& ai : spec.a) ai /= asum;
        for (auto& wi : spec.w)
            wi = unit_weights ? 1.0 : rng.uniform(1.0, 4.0);

        const int t = 1 + static_cast<int>(rng.below(60));
        std::vector<double> z(static_cast<std::size_t>(dim));
        for (auto& v : z) v = 2.0 * rng.normal();

        std::vector<double> via_w(z.size()), via_gpoe(z.size());
        compose_epsilon(bundle, spec, z, t, via_w);
        compose_epsilon_gpoe(bundle, spec.a, spec.w, z, t, via_gpoe);

        // term magnitude for the error scale
        std::vector<double> scale(z.size(), 0.0), tmp(z.size());
        double wsum = 0.0;
        for (int i = 0; i < n; ++i) {
            bundle.conditional_epsilon(i, z.data(), 1, t, tmp.data());
            const double wi = spec.w[static_cast<std::size_t>(i)];
            wsum += wi;
            for (std::size_t d = 0; d < z.size(); ++d)
                scale[d] += wi * std::abs(tmp[d]);
        }
        unconditional_blend(bundle, spec.a, z.data(), 1, t, tmp.data());
        for (std::size_t d = 0; d < z.size(); ++d) {
            scale[d] += (wsum + 1.0) * std::abs(tmp[d]);
            worst = std::max(worst,
                             identity_error(via_w[d], via_gpoe[d], scale[d]));
        }
    }
    return worst;
}

CheckResult check_gpoe_identity() {
    CheckResult r{"weighted_equals_product_form", false, 0.0, 1e-14,
                  "max identity error, N in 1..4, dim in {1,2,8}"};
    r.measured = gpoe_identity_worst(false);
    r.pass = r.measured <= r.threshold;
    return r;
}

CheckResult check_unweighted_reduction() {
    CheckResult r{"unit_weights_equal_plain_form", false, 0.0, 1e-14,
                  "max identity error at w = 1"};
    r.measured = gpoe_identity_worst(true);
    r.pass = r.measured <= r.threshold;
    return r;
}

CheckResult check_single_gaussian_moments() {
    CheckResult r{"single_gaussian_ancestral_moments", false, 0.0, 0.05,
                  "max(|mean-2|, |std-0.5|), 1e4 chains"};
    auto master = std::make_shared<NoiseSchedule>(
        make_linear_schedule(1000, 1e-4, 0.02));
    std::map<Condition, GaussianParams> table;
    table.emplace(Condition::null(), GaussianParams{{2.0}, {0.5}});
    auto expert = std::make_shared<GaussianExpert>(1, std::move(table));
    ExpertBundle bundle(master, {{expert, Condition::null(), nullptr}});
    CompositionSpec spec;
    spec.a = {1.0};
    spec.w = {1.0};
    SamplerConfig cfg;
    cfg.kind = SamplerKind::ancestral;
    cfg.seed = 7081;
    const SampleBatch batch = sample(bundle, spec, cfg, 10000);
    const Moments m = moments(batch.states, batch.count, batch.dim);
    const double sd = std::sqrt(m.covariance[0]);
    r.measured = std::max(std::abs(m.mean[0] - 2.0), std::abs(sd - 0.5));
    r.pass = r.measured <= r.threshold;
    return r;
}

RunConfig two_gaussian_fixture() {
    return parse_run_config(default_config_json(), "");
}

CheckResult check_two_gaussian_tv() {
    CheckResult r{"two_gaussian_tv_to_product", false, 0.0, 0.15,
                  "TV(sample histogram, grid product), 1e4 chains, 64 bins"};
    const RunConfig cfg = two_gaussian_fixture();
    const ExpertBundle bundle = cfg.build_bundle();
    const SampleBatch batch =
        sample(bundle, cfg.composition, cfg.sampler, cfg.chains);

    std::vector<GridDensity> conditionals, unconditionals;
    for (const auto& decl : cfg.experts) {
        conditionals.push_back(diffused_marginal_density(
            decl.conditional_mixture(), *cfg.master, 0, cfg.grid));
        unconditionals.push_back(diffused_marginal_density(
            decl.unconditional_mixture(), *cfg.master, 0, cfg.grid));
    }
    const GridDensity blend = power_blend(unconditionals, cfg.composition.a);
    const ProductResult product =
        product_density(conditionals, blend, cfg.composition.w);
    const HistogramResult hist =
        histogram(batch.states, batch.count, batch.dim, cfg.grid);
    r.measured = tv_distance(hist.density, product.density);
    r.pass = r.measured <= r.threshold;
    return r;
}

CheckResult check_reliability_endpoints() {
    CheckResult r{"reliability_endpoint_blend_exact", false, 0.0, 1e-15,
                  "max |blend - expert uncond| at one-hot a"};
    RngStream rng(31);
    auto master = std::make_shared<NoiseSchedule>(
        make_linear_schedule(100, 1e-4, 0.05));
    ExpertBundle bundle = random_bundle(rng, master, 2, 2);
    double worst = 0.0;
    for (int hot = 0; hot < 2; ++hot) {
        std::vector<double> a{0.0, 0.0};
        a[static_cast<std::size_t>(hot)] = 1.0;
        for (int trial = 0; trial < 64; ++trial) {
            const int t = 1 + static_cast<int>(rng.below(100));
            std::vector<double> z{2.0 * rng.normal(), 2.0 * rng.normal()};
            std::vector<double> blend(2), direct(2);
            unconditional_blend(bundle, a, z.data(), 1, t, blend.data());
            bundle.unconditional_epsilon(hot, z.data(), 1, t, direct.data());
            for (int d = 0; d < 2; ++d)
                worst = std::max(
                    worst, std::abs(blend[static_cast<std::size_t>(d)] -
                                    direct[static_cast<std::size_t>(d)]));
        }
    }
    r.measured = worst;
    r.pass = worst <= r.threshold;
    return r;
}

CheckResult check_reliability_sweep_cells() {
    CheckResult r{"reliability_sweep_emits_all_cells", false, 0.0, 7.0,
                  "cells produced for the 0.0..1.0 reliability grid"};
    RunConfig cfg = two_gaussian_fixture();
    cfg.chains = 256;  // cell count is what matters here
    cfg.sampler.kind = SamplerKind::ddim;  // the sweep protocol: 100
    cfg.sampler.num_steps = 100;           // deterministic steps, shared noise
    SweepRequest req;
    req.param = SweepParam::reliability;
    req.index = 0;
    req.values = {0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0};
    req.shared_noise = true;
    const auto cells = run_sweep(cfg, req);
    std::size_t produced = 0;
    for (const auto& c : cells)
        if (!c.skipped) ++produced;
    r.measured = static_cast<double>(produced);
    r.pass = produced == 7;
    return r;
}

CheckResult check_dsm_gradients() {
    CheckResult r{"dsm_gradients_match_finite_differences", false, 0.0, 1e-4,
                  "max rel err, 2-8-2 net, central differences"};
    const NoiseSchedule schedule = make_linear_schedule(50, 1e-4, 0.05);
    const MlpArch arch = make_mlp_arch(2, {8}, {0, 1});
    std::vector<double> params = init_mlp_params(arch, 99);

    RngStream rng(4242);
    const std::size_t count = 16;
    std::vector<double> z0(count * 2);
    std::vector<int> labels(count);
    for (std::size_t i = 0; i < count; ++i) {
        z0[i * 2] = rng.normal();
        z0[i * 2 + 1] = rng.normal();
        labels[i] = static_cast<int>(rng.below(2));
    }
    const DsmDraws draws = draw_dsm_batch(rng, count, 2, schedule.steps(), 0.2);

    std::vector<double> grad(arch.param_count());
    dsm_loss_grad(arch, params, z0, labels, schedule, draws, grad);

    std::vector<double> scratch(arch.param_count());
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double keep = params[k];
        params[k] = keep + h;
        const double up =
            dsm_loss_grad(arch, params, z0, labels, schedule, draws, scratch);
        params[k] = keep - h;
        const double dn =
            dsm_loss_grad(arch, params, z0, labels, schedule, draws, scratch);
        params[k] = keep;
        const double fd = (up - dn) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad[k]), 1e-8});
        worst = std::max(worst, std::abs(fd - grad[k]) / denom);
    }
    r.measured = worst;
    r.pass = worst <= r.threshold;
    return r;
}

struct BlobTraining {
    DatasetSpec spec;
    NoiseSchedule schedule;
    TrainResult result;
};

const BlobTraining& blob_training() {
    static const BlobTraining bt = [] {
        DatasetSpec spec;
        spec.kind = DatasetKind::gaussian_blobs;
        spec.blobs = {{0, {-2.0, 0.0}, 0.3}, {1, {2.0, 0.0}, 0.3}};
        spec.count = 4096;
        spec.seed = 515;
        TrainConfig cfg;
        cfg.epochs = 30;
        cfg.batch_size = 128;
        cfg.learning_rate = 1e-2;
        cfg.seed = 929;
        cfg.p_uncond = 0.1;
        NoiseSchedule schedule = make_linear_schedule(1000, 1e-4, 0.02);
        TrainResult result =
            train_expert(generate_dataset(spec), {64, 64}, schedule, cfg);
        return BlobTraining{std::move(spec), std::move(schedule),
                            std::move(result)};
    }();
    return bt;
}

CheckResult check_training_loss_halves() {
    CheckResult r{"blob_training_halves_epoch_loss", false, 0.0, 0.5,
                  "final epoch loss / first epoch loss, 30 epochs"};
    const auto& bt = blob_training();
    r.measured = bt.result.epoch_loss.back() / bt.result.epoch_loss.front();
    r.pass = r.measured < r.threshold;
    return r;
}

CheckResult check_trained_field_cosine() {
    CheckResult r{"trained_uncond_field_matches_mixture", false, 0.0, 0.9,
                  "cosine similarity at t = T over a probe grid (pass > 0.9)"};
    const auto& bt = blob_training();
    std::vector<GmmComponent> mixture;
    for (const auto& blob : bt.spec.blobs)
        mixture.push_back({1.0 / static_cast<double>(bt.spec.blobs.size()),
                           {blob.mu[0], blob.mu[1]},
                           {blob.sigma, blob.sigma}});
    const int T = bt.schedule.steps();
    double dot = 0.0, nn = 0.0, na = 0.0;
    std::vector<double> z(2), got(2), want(2);
    for (int ix = -3; ix <= 3; ++ix)
        for (int iy = -3; iy <= 3; ++iy) {
            z[0] = ix;
            z[1] = iy;
            bt.result.expert.epsilon(z, Condition::null(), T, bt.schedule, got);
            gmm_marginal_epsilon(mixture, bt.schedule, T, z, want);
            for (int d = 0; d < 2; ++d) {
                const auto du = static_cast<std::size_t>(d);
                dot += got[du] * want[du];
                nn += got[du] * got[du];
                na += want[du] * want[du];
            }
        }
    r.measured = dot / std::sqrt(nn * na);
    r.pass = r.measured > r.threshold;
    return r;
}

CheckResult check_sampler_determinism() {
    CheckResult r{"sampler_reproducible_from_seed", false, 0.0, 0.0,
                  "max |run1 - run2| with the same seed; runs differ across seeds"};
    const RunConfig cfg = two_gaussian_fixture();
    const ExpertBundle bundle = cfg.build_bundle();
    SamplerConfig sc = cfg.sampler;
    const SampleBatch b1 = sample(bundle, cfg.composition, sc, 512);
    const SampleBatch b2 = sample(bundle, cfg.composition, sc, 512);
    sc.seed ^= 0x1234;
    const SampleBatch b3 = sample(bundle, cfg.composition, sc, 512);
    double worst = 0.0;
    bool differs = false;
    for (std::size_t i = 0; i < b1.states.size(); ++i) {
        worst = std::max(worst, std::abs(b1.states[i] - b2.states[i]));
        differs = differs || b1.states[i] != b3.states[i];
    }
    r.measured = worst;
    r.pass = worst == 0.0 && differs;
    return r;
}

}  // namespace

std::vector<CheckResult> run_verification() {
    std::vector<CheckResult> results;
    results.push_back(check_kernel_variants());
    results.push_back(check_linear_endpoint());
    results.push_back(check_cosine_consistency());
    results.push_back(check_cfg_equivalence());
    results.push_back(check_gpoe_identity());
    results.push_back(check_unweighted_reduction());
    results.push_back(check_single_gaussian_moments());
    results.push_back(check_two_gaussian_tv());
    results.push_back(check_reliability_endpoints());
    results.push_back(check_reliability_sweep_cells());
    results.push_back(check_dsm_gradients());
    results.push_back(check_training_loss_halves());
    results.push_back(check_trained_field_cosine());
    results.push_back(check_sampler_determinism());
    return results;
}

}  // namespace unite
