#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "unite/density.hpp"
#include "unite/rng.hpp"
#include "unite/sampler.hpp"

using namespace unite;

namespace {

std::shared_ptr<GaussianExpert> single_gaussian(double mu, double sigma) {
    std::map<Condition, GaussianParams> table;
    table.emplace(Condition::null(), GaussianParams{{mu}, {sigma}});
    return std::make_shared<GaussianExpert>(1, std::move(table));
}

// expert that answers with the exact forward noise for a known z0
class ExactNoiseExpert : public Expert {
public:
    explicit ExactNoiseExpert(std::vector<double> z0) : z0_(std::move(z0)) {}
    int dim() const override { return static_cast<int>(z0_.size()); }
    void epsilon(std::span<const double> z_t, const Condition&, int t,
                 const NoiseSchedule& s, std::span<double> out) const override {
        const double sa = std::sqrt(s.alpha_bar(t));
        const double root1m = std::sqrt(1.0 - s.alpha_bar(t));
        for (std::size_t d = 0; d < z0_.size(); ++d)
            out[d] = (z_t[d] - sa * z0_[d]) / root1m;
    }

private:
    std::vector<double> z0_;
};

}  // namespace

TEST_CASE("ancestral step arithmetic") {
    // one-step schedule with beta = 0.02; abar pinned via beta
    const NoiseSchedule s = make_linear_schedule(1, 0.02, 0.02);

    SUBCASE("zero drift divides by sqrt(1-beta)") {
        const std::vector<double> z{1.0}, eps{0.0}, noise{0.0};
        std::vector<double> out(1);
        ddpm_step(z, eps, s, 1, noise, SigmaConvention::sigma, out);
        CHECK(out[0] ==
              doctest::Approx(1.0 / std::sqrt(0.98)).epsilon(1e-15));
    }

    SUBCASE("no stochastic term at t = 1") {
        const std::vector<double> z{1.0}, eps{0.0}, noise{123.0};
        std::vector<double> out(1);
        ddpm_step(z, eps, s, 1, noise, SigmaConvention::sigma, out);
        CHECK(out[0] ==
              doctest::Approx(1.0 / std::sqrt(0.98)).epsilon(1e-15));
    }
}

TEST_CASE("ancestral step frozen value") {
    // frozen constant: formula value at beta = 0.02, abar = 0.5,
    // z = 1, eps = 0.7, noise = 0 (computed independently beforehand)
    const double beta = 0.02, abar = 0.5;
    const double want = 0.99015254455221075;
    const double direct = (1.0 / std::sqrt(1.0 - beta)) *
                          (1.0 - beta / std::sqrt(1.0 - abar) * 0.7);
    CHECK(direct == doctest::Approx(want).epsilon(1e-15));

    // the step routine applies the same formula with its schedule's values
    const NoiseSchedule s = make_linear_schedule(5, 0.01, 0.3);
    for (int t = 2; t <= 5; ++t) {
        const std::vector<double> zt{1.0}, ec{0.7}, noise{0.0};
        std::vector<double> out(1);
        ddpm_step(zt, ec, s, t, noise, SigmaConvention::sigma, out);
        const double b = s.beta(t), ab = s.alpha_bar(t);
        const double manual = (1.0 / std::sqrt(1.0 - b)) *
                              (1.0 - b / std::sqrt(1.0 - ab) * 0.7);
        CHECK(out[0] == doctest::Approx(manual).epsilon(1e-14));
    }
}

TEST_CASE("sigma conventions differ in the noise scale only") {
    const NoiseSchedule s = make_linear_schedule(10, 0.01, 0.1);
    const std::vector<double> z{0.5}, eps{0.2}, noise{1.0};
    std::vector<double> a(1), b(1);
    ddpm_step(z, eps, s, 5, noise, SigmaConvention::sigma, a);
    ddpm_step(z, eps, s, 5, noise, SigmaConvention::sigma_squared, b);
    const double beta = s.beta(5);
    CHECK(a[0] - b[0] ==
          doctest::Approx(std::sqrt(beta) - beta).epsilon(1e-12));
}

TEST_CASE("deterministic step identities") {
    const NoiseSchedule s = make_linear_schedule(100, 1e-4, 0.1);

    SUBCASE("degenerate pair returns z_t when alpha_bars coincide") {
        // t_prev = t is rejected; emulate the degenerate case with the
        // coefficient identity instead: alpha_bar equal means A=1, B=0
        const std::vector<double> z{1.3}, eps{0.4};
        std::vector<double> out(1);
        // closest legal approximation: a one-step pair whose alpha_bars are
        // built equal via a custom schedule is not constructible here, so
        // check the T=1 jump to t_prev=0 inverts q_sample instead
        const ExactNoiseExpert expert({0.37});
        std::vector<double> e(1);
        expert.epsilon(z, Condition::null(), 60, s, e);
        ddim_step(z, e, s, 60, 0, out);
        CHECK(out[0] == doctest::Approx(0.37).epsilon(1e-12));
    }

    SUBCASE("exact noise reconstructs z0 through predict_z0") {
        const std::vector<double> z0{-0.8, 1.7};
        RngStream rng(5);
        const NoiseSchedule big = make_linear_schedule(1000, 1e-4, 0.02);
        for (int t : {1, 250, 999}) {
            std::vector<double> noise{rng.normal(), rng.normal()}, zt(2),
                zhat(2);
            q_sample(big, z0, t, noise, zt);
            std::vector<double> eps(2);
            const ExactNoiseExpert expert(z0);
            expert.epsilon(zt, Condition::null(), t, big, eps);
            predict_z0(zt, eps, big, t, zhat);
            CHECK(zhat[0] == doctest::Approx(z0[0]).epsilon(1e-10));
            CHECK(zhat[1] == doctest::Approx(z0[1]).epsilon(1e-10));
        }
    }

    SUBCASE("a near-degenerate pair is a near-identity") {
        // adjacent timesteps of an almost-noiseless schedule: the z
        // coefficient approaches 1 and the eps coefficient approaches 0
        const NoiseSchedule tiny = make_linear_schedule(2, 1e-12, 1e-12);
        const std::vector<double> z{1.3}, eps{0.4};
        std::vector<double> out(1);
        ddim_step(z, eps, tiny, 2, 1, out);
        CHECK(out[0] == doctest::Approx(1.3).epsilon(1e-6));
    }

    SUBCASE("invalid step pairs are rejected") {
        const std::vector<double> z{0.0}, eps{0.0};
        std::vector<double> out(1);
        CHECK_THROWS_AS(ddim_step(z, eps, s, 10, 10, out),
                        std::invalid_argument);
        CHECK_THROWS_AS(ddim_step(z, eps, s, 10, 11, out),
                        std::invalid_argument);
        CHECK_THROWS_AS(ddim_step(z, eps, s, 10, -1, out),
                        std::invalid_argument);
    }
}

TEST_CASE("ddim timestep subsequences") {
    SUBCASE("even division") {
        const auto ts = ddim_timesteps(1000, 100);
        CHECK(ts.size() == 100);
        CHECK(ts.front() == 10);
        CHECK(ts.back() == 1000);
        for (std::size_t k = 1; k < ts.size(); ++k) CHECK(ts[k] > ts[k - 1]);
    }
    SUBCASE("ragged division stays strictly increasing and ends at T") {
        for (int T : {7, 97, 1000})
            for (int S : {1, 2, 3, 5, 7}) {
                if (S > T) continue;
                const auto ts = ddim_timesteps(T, S);
                CHECK(static_cast<int>(ts.size()) == S);
                CHECK(ts.back() == T);
                CHECK(ts.front() >= 1);
                for (std::size_t k = 1; k < ts.size(); ++k)
                    CHECK(ts[k] > ts[k - 1]);
            }
    }
    SUBCASE("bad counts are rejected") {
        CHECK_THROWS_AS(ddim_timesteps(10, 0), std::invalid_argument);
        CHECK_THROWS_AS(ddim_timesteps(10, 11), std::invalid_argument);
    }
}

TEST_CASE("sampling determinism and seeding") {
    auto master = std::make_shared<NoiseSchedule>(
        make_linear_schedule(200, 1e-4, 0.05));
    const ExpertBundle bundle(
        master, {{single_gaussian(0.5, 1.0), Condition::null(), nullptr}});
    CompositionSpec spec;
    spec.a = {1.0};
    spec.w = {1.0};

    SamplerConfig cfg;
    cfg.kind = SamplerKind::ddim;
    cfg.num_steps = 50;
    cfg.seed = 31415;

    const SampleBatch a = sample(bundle, spec, cfg, 8);
    const SampleBatch b = sample(bundle, spec, cfg, 8);
    CHECK(a.states == b.states);

    cfg.seed = 27182;
    const SampleBatch c = sample(bundle, spec, cfg, 8);
    CHECK(a.states != c.states);
}

TEST_CASE("chains are independent of batch composition") {
    // chain i alone reproduces chain i inside a larger batch
    auto master = std::make_shared<NoiseSchedule>(
        make_linear_schedule(100, 1e-4, 0.05));
    const ExpertBundle bundle(
        master, {{single_gaussian(-1.0, 0.7), Condition::null(), nullptr}});
    CompositionSpec spec;
    spec.a = {1.0};
    spec.w = {1.0};
    SamplerConfig cfg;
    cfg.kind = SamplerKind::ancestral;
    cfg.seed = 999;

    const SampleBatch big = sample(bundle, spec, cfg, 5);
    const SampleBatch lone = sample(bundle, spec, cfg, 1);
    CHECK(big.states[0] == lone.states[0]);
}

TEST_CASE("trajectory capture records chain zero") {
    auto master = std::make_shared<NoiseSchedule>(
        make_linear_schedule(50, 1e-4, 0.05));
    const ExpertBundle bundle(
        master, {{single_gaussian(0.0, 1.0), Condition::null(), nullptr}});
    CompositionSpec spec;
    spec.a = {1.0};
    spec.w = {1.0};
    SamplerConfig cfg;
    cfg.kind = SamplerKind::ddim;
    cfg.num_steps = 10;
    cfg.seed = 5;
    cfg.record_trajectory = true;

    const SampleBatch batch = sample(bundle, spec, cfg, 3);
    CHECK(batch.trajectory.size() == 11);  // initial + one per step
    CHECK(batch.trajectory.front().first == 50);
    CHECK(batch.trajectory.back().first == 0);
    CHECK(batch.trajectory.back().second[0] == batch.states[0]);
}

TEST_CASE("chain marginals track the diffused marginal along the way") {
    // drive the public step ops directly so intermediate states of every
    // chain are visible; single exact Gaussian expert mu=1, sigma=0.8
    const NoiseSchedule s = make_linear_schedule(300, 1e-4, 0.03);
    const double mu = 1.0, sigma = 0.8;
    auto expert = single_gaussian(mu, sigma);

    const std::size_t chains = 10000;
    std::vector<RngStream> streams;
    streams.reserve(chains);
    for (std::size_t i = 0; i < chains; ++i)
        streams.push_back(RngStream::substream(4321, i));

    std::vector<double> z(chains), eps(chains), noise(chains);
    for (std::size_t i = 0; i < chains; ++i) z[i] = streams[i].normal();

    // the variance must track abar*sigma^2 + 1 - abar at every checkpoint;
    // the mean starts biased (chains initialize at N(0,1), not the true
    // t=T marginal) and must have converged by t=1
    const auto check_variance = [&](int t) {
        const double ab = s.alpha_bar(t);
        const double want_var = ab * sigma * sigma + 1.0 - ab;
        double sum = 0.0, sumsq = 0.0;
        for (double v : z) {
            sum += v;
            sumsq += v * v;
        }
        const double mean = sum / static_cast<double>(chains);
        const double var = sumsq / static_cast<double>(chains) - mean * mean;
        CHECK(std::abs(var - want_var) < 0.06);
        return mean;
    };

    check_variance(300);
    for (int t = 300; t >= 1; --t) {
        expert->epsilon_batch(z.data(), chains, Condition::null(), t, s,
                              eps.data());
        for (std::size_t i = 0; i < chains; ++i)
            noise[i] = t > 1 ? streams[i].normal() : 0.0;
        for (std::size_t i = 0; i < chains; ++i)
            ddpm_step({&z[i], 1}, {&eps[i], 1}, s, t, {&noise[i], 1},
                      SigmaConvention::sigma, {&z[i], 1});
        if (t - 1 == 150) check_variance(150);
    }
    const double final_mean = check_variance(1);
    CHECK(std::abs(final_mean - std::sqrt(s.alpha_bar(1)) * mu) < 0.05);
}

TEST_CASE("ancestral chain tracks the analytic marginal variance") {
    // single exact Gaussian expert: chain variance at t matches
    // abar_t sigma^2 + 1 - abar_t within Monte-Carlo tolerance
    auto master = std::make_shared<NoiseSchedule>(
        make_linear_schedule(300, 1e-4, 0.03));
    const double mu = 1.0, sigma = 0.6;
    const ExpertBundle bundle(
        master, {{single_gaussian(mu, sigma), Condition::null(), nullptr}});
    CompositionSpec spec;
    spec.a = {1.0};
    spec.w = {1.0};

    SamplerConfig cfg;
    cfg.kind = SamplerKind::ancestral;
    cfg.seed = 2024;
    cfg.record_trajectory = false;

    const std::size_t chains = 10000;
    const SampleBatch batch = sample(bundle, spec, cfg, chains);
    const Moments m = moments(batch.states, batch.count, batch.dim);
    // at t=0 the chain should land on the data law
    const double se_mean = sigma / std::sqrt(static_cast<double>(chains));
    CHECK(std::abs(m.mean[0] - mu) < 6.0 * se_mean + 0.01);
    CHECK(std::abs(std::sqrt(m.covariance[0]) - sigma) < 0.03);
}
