#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <vector>

#include "unite/trainer.hpp"

using namespace unite;

TEST_CASE("dataset generators are seeded and labelled") {
    DatasetSpec spec;
    spec.kind = DatasetKind::gaussian_blobs;
    spec.blobs = {{0, {-2.0, 0.0}, 0.3}, {1, {2.0, 0.0}, 0.3}};
    spec.count = 500;
    spec.seed = 42;

    const Dataset2D a = generate_dataset(spec);
    const Dataset2D b = generate_dataset(spec);
    CHECK(a.points == b.points);
    CHECK(a.labels == b.labels);
    CHECK(a.label_set() == std::vector<int>{0, 1});

    // blob points sit near their means
    for (std::size_t i = 0; i < a.count; ++i) {
        const double cx = a.labels[i] == 0 ? -2.0 : 2.0;
        CHECK(std::abs(a.points[i * 2] - cx) < 2.0);
    }

    spec.seed = 43;
    const Dataset2D c = generate_dataset(spec);
    CHECK(a.points != c.points);
}

TEST_CASE("two moons and checkerboard generators") {
    DatasetSpec moons;
    moons.kind = DatasetKind::two_moons;
    moons.moons_noise = 0.01;
    moons.count = 400;
    moons.seed = 1;
    const Dataset2D m = generate_dataset(moons);
    CHECK(m.label_set() == std::vector<int>{0, 1});
    for (std::size_t i = 0; i < m.count; ++i) {
        CHECK(std::abs(m.points[i * 2]) < 2.5);
        CHECK(std::abs(m.points[i * 2 + 1]) < 2.0);
    }

    DatasetSpec checker;
    checker.kind = DatasetKind::checkerboard;
    checker.checker_extent = 2.0;
    checker.count = 400;
    checker.seed = 2;
    const Dataset2D c = generate_dataset(checker);
    for (std::size_t i = 0; i < c.count; ++i) {
        const auto px = static_cast<long long>(std::floor(c.points[i * 2]));
        const auto py = static_cast<long long>(std::floor(c.points[i * 2 + 1]));
        const int parity = static_cast<int>((((px + py) % 2) + 2) % 2);
        CHECK(c.labels[i] == parity);
    }
}

TEST_CASE("dsm loss on constructed predictors") {
    const NoiseSchedule s = make_linear_schedule(50, 1e-4, 0.05);
    const MlpArch arch = make_mlp_arch(2, {4}, {0});
    const std::vector<double> zero_params(arch.param_count(), 0.0);

    RngStream rng(7);
    const std::size_t count = 8;
    std::vector<double> z0(count * 2);
    std::vector<int> labels(count, 0);
    for (auto& v : z0) v = rng.normal();
    DsmDraws draws = draw_dsm_batch(rng, count, 2, 50, 0.0);

    SUBCASE("zero predictor, zero noise: perfect prediction") {
        DsmDraws quiet = draws;
        std::fill(quiet.noise.begin(), quiet.noise.end(), 0.0);
        std::vector<double> grad(arch.param_count());
        const double loss =
            dsm_loss_grad(arch, zero_params, z0, labels, s, quiet, grad);
        CHECK(loss == 0.0);
    }

    SUBCASE("zero predictor: loss is the mean squared injected noise") {
        std::vector<double> grad(arch.param_count());
        const double loss =
            dsm_loss_grad(arch, zero_params, z0, labels, s, draws, grad);
        double want = 0.0;
        for (double n : draws.noise) want += n * n;
        want /= static_cast<double>(draws.noise.size());
        CHECK(loss == doctest::Approx(want).epsilon(1e-14));
    }

    SUBCASE("loss is invariant to example order within a batch") {
        std::vector<double> grad1(arch.param_count()), grad2(arch.param_count());
        std::vector<double> params = init_mlp_params(arch, 3);
        const double l1 = dsm_loss_grad(arch, params, z0, labels, s, draws, grad1);

        // reverse the batch (points, labels and draws together)
        std::vector<double> z0r(z0.rbegin(), z0.rend());
        for (std::size_t i = 0; i < count; ++i)
            std::swap(z0r[i * 2], z0r[i * 2 + 1]);  // undo coordinate flip
        DsmDraws rdraws;
        rdraws.t.assign(draws.t.rbegin(), draws.t.rend());
        rdraws.drop.assign(draws.drop.rbegin(), draws.drop.rend());
        rdraws.noise.assign(draws.noise.rbegin(), draws.noise.rend());
        for (std::size_t i = 0; i < count; ++i)
            std::swap(rdraws.noise[i * 2], rdraws.noise[i * 2 + 1]);
        const double l2 =
            dsm_loss_grad(arch, params, z0r, labels, s, rdraws, grad2);
        CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
        for (std::size_t k = 0; k < grad1.size(); ++k)
            CHECK(grad1[k] == doctest::Approx(grad2[k]).epsilon(1e-9));
    }
}

TEST_CASE("gradients match central finite differences on a 2-8-2 net") {
    const NoiseSchedule s = make_linear_schedule(50, 1e-4, 0.05);
    const MlpArch arch = make_mlp_arch(2, {8}, {0, 1});
    std::vector<double> params = init_mlp_params(arch, 99);

    RngStream rng(4242);
    const std::size_t count = 12;
    std::vector<double> z0(count * 2);
    std::vector<int> labels(count);
    for (std::size_t i = 0; i < count; ++i) {
        z0[i * 2] = rng.normal();
        z0[i * 2 + 1] = rng.normal();
        labels[i] = static_cast<int>(rng.below(2));
    }
    const DsmDraws draws = draw_dsm_batch(rng, count, 2, 50, 0.25);

    std::vector<double> grad(arch.param_count()), scratch(arch.param_count());
    dsm_loss_grad(arch, params, z0, labels, s, draws, grad);

    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double keep = params[k];
        params[k] = keep + h;
        const double up = dsm_loss_grad(arch, params, z0, labels, s, draws, scratch);
        params[k] = keep - h;
        const double dn = dsm_loss_grad(arch, params, z0, labels, s, draws, scratch);
        params[k] = keep;
        const double fd = (up - dn) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad[k]), 1e-8});
        worst = std::max(worst, std::abs(fd - grad[k]) / denom);
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("training behaviour") {
    const NoiseSchedule s = make_linear_schedule(200, 1e-4, 0.05);
    DatasetSpec dspec;
    dspec.kind = DatasetKind::gaussian_blobs;
    dspec.blobs = {{0, {-2.0, 0.0}, 0.3}, {1, {2.0, 0.0}, 0.3}};
    dspec.count = 512;
    dspec.seed = 11;
    const Dataset2D ds = generate_dataset(dspec);

    SUBCASE("zero epochs returns the seeded initialization") {
        TrainConfig cfg;
        cfg.epochs = 0;
        cfg.seed = 21;
        const TrainResult r = train_expert(ds, {16}, s, cfg);
        const MlpArch arch = make_mlp_arch(2, {16}, ds.label_set());
        CHECK(r.expert.params() == init_mlp_params(arch, 21));
        CHECK(r.epoch_loss.empty());
    }

    SUBCASE("same seed trains to identical weights") {
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.batch_size = 64;
        cfg.seed = 77;
        const TrainResult r1 = train_expert(ds, {16}, s, cfg);
        const TrainResult r2 = train_expert(ds, {16}, s, cfg);
        CHECK(r1.expert.params() == r2.expert.params());
        CHECK(r1.epoch_loss == r2.epoch_loss);
    }

    SUBCASE("a few epochs reduce the loss") {
        TrainConfig cfg;
        cfg.epochs = 8;
        cfg.batch_size = 64;
        cfg.learning_rate = 1e-2;
        cfg.seed = 5;
        const TrainResult r = train_expert(ds, {32}, s, cfg);
        CHECK(r.epoch_loss.back() < r.epoch_loss.front());
    }

    SUBCASE("bad configs are rejected") {
        TrainConfig cfg;
        cfg.learning_rate = 0.0;
        CHECK_THROWS_AS(train_expert(ds, {8}, s, cfg), std::invalid_argument);
        cfg.learning_rate = 0.1;
        cfg.p_uncond = 1.0;
        CHECK_THROWS_AS(train_expert(ds, {8}, s, cfg), std::invalid_argument);
    }

    SUBCASE("divergence aborts with a diagnostic") {
        TrainConfig cfg;
        cfg.epochs = 40;
        cfg.batch_size = 32;
        cfg.learning_rate = 1e6;  // blow up on purpose
        cfg.seed = 5;
        CHECK_THROWS_AS(train_expert(ds, {16}, s, cfg), std::runtime_error);
    }
}
