#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "fixtures.hpp"
#include "histbayes/diagnostics.hpp"
#include "histbayes/samplers.hpp"

using namespace histbayes;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

FunctionTarget normal_target(double mu, double sigma, Bounds b = {-kInf, kInf}, double init = 0.0) {
    FunctionTarget t;
    t.parameter_names = {"x"};
    t.parameter_bounds = {b};
    t.init = {init};
    auto lp = [=](std::span<const double> x) {
        if (x[0] < b.lo || x[0] > b.hi) return -kInf;
        const double z = (x[0] - mu) / sigma;
        return -0.5 * z * z;
    };
    t.logp = lp;
    t.logp_and_grad = [=](std::span<const double> x, std::span<double> g) {
        g[0] = -(x[0] - mu) / (sigma * sigma);
        return lp(x);
    };
    return t;
}

// independent Gaussian in 2-D with scales (1, 3)
auto anisotropic_grad = [](std::span<const double> x, std::span<double> g) {
    g[0] = -x[0];
    g[1] = -x[1] / 9.0;
    return -0.5 * (x[0] * x[0] + x[1] * x[1] / 9.0);
};

SamplerConfig hmc(std::size_t draws, std::uint64_t seed = 1, double eps = 0.2, std::size_t steps = 10) {
    SamplerConfig c;
    c.kind = SamplerKind::HMC;
    c.n_draws = draws;
    c.seed = seed;
    c.step_size = eps;
    c.n_leapfrog = steps;
    return c;
}

SamplerConfig mh(std::size_t draws, double scale, std::uint64_t seed = 1) {
    SamplerConfig c;
    c.kind = SamplerKind::MH;
    c.n_draws = draws;
    c.seed = seed;
    c.proposal_scale = {scale};
    return c;
}

double mcse(const std::vector<double>& x) { return std::sqrt(stats::variance(x) / effective_sample_size(x)); }

}  // namespace

TEST(Leapfrog, ReversibleUnderMomentumFlip) {
    const std::vector<double> q0{0.7, -1.4}, p0{0.3, 1.1};
    const auto fwd = leapfrog(std::span<const double>(q0), std::span<const double>(p0), 0.1, 25, anisotropic_grad);
    std::vector<double> flipped{-fwd.momentum[0], -fwd.momentum[1]};
    const auto back = leapfrog(std::span<const double>(fwd.theta), std::span<const double>(flipped), 0.1, 25,
                               anisotropic_grad);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR(back.theta[i], q0[i], 1e-12);
        EXPECT_NEAR(-back.momentum[i], p0[i], 1e-12);
    }
}

TEST(Leapfrog, EnergyErrorIsSecondOrder) {
    const std::vector<double> q0{1.0, 2.0}, p0{0.5, -0.5};
    auto energy_error = [&](double eps) {
        const auto n = static_cast<std::size_t>(std::lround(1.0 / eps));
        const auto r = leapfrog(std::span<const double>(q0), std::span<const double>(p0), eps, n, anisotropic_grad);
        std::vector<double> g(2);
        const double h0 = -anisotropic_grad(q0, g) + kinetic_energy(p0);
        return std::abs(-r.log_density + kinetic_energy(r.momentum) - h0);
    };
    const double e1 = energy_error(0.1), e2 = energy_error(0.05);
    EXPECT_NEAR(e1 / e2, 4.0, 0.4);
}

TEST(Leapfrog, FreeParticleMovesLinearly) {
    auto flat = [](std::span<const double>, std::span<double> g) {
        g[0] = 0.0;
        return 0.0;
    };
    const std::vector<double> q{1.0}, p{0.25};
    const auto r = leapfrog(std::span<const double>(q), std::span<const double>(p), 0.2, 10, flat);
    EXPECT_NEAR(r.theta[0], 1.0 + 10 * 0.2 * 0.25, 1e-14);
    EXPECT_EQ(r.momentum[0], 0.25);
}

TEST(Leapfrog, PreservesPhaseSpaceVolume) {
    // Jacobian of (q, p) -> (q', p') by central differences
    const std::vector<double> z0{0.4, -0.8, 1.2, 0.1};
    auto map = [](const std::vector<double>& z) {
        const auto r = leapfrog(std::span<const double>(z.data(), 2), std::span<const double>(z.data() + 2, 2), 0.15,
                                12, anisotropic_grad);
        return std::vector<double>{r.theta[0], r.theta[1], r.momentum[0], r.momentum[1]};
    };
    double J[4][4];
    const double h = 1e-6;
    for (int j = 0; j < 4; ++j) {
        auto up = z0, dn = z0;
        up[j] += h;
        dn[j] -= h;
        const auto a = map(up), b = map(dn);
        for (int i = 0; i < 4; ++i) J[i][j] = (a[i] - b[i]) / (2 * h);
    }
    // determinant by Gaussian elimination
    double det = 1.0;
    for (int c = 0; c < 4; ++c) {
        int piv = c;
        for (int r = c + 1; r < 4; ++r)
            if (std::abs(J[r][c]) > std::abs(J[piv][c])) piv = r;
        if (piv != c) {
            for (int k = 0; k < 4; ++k) std::swap(J[c][k], J[piv][k]);
            det = -det;
        }
        det *= J[c][c];
        for (int r = c + 1; r < 4; ++r) {
            const double f = J[r][c] / J[c][c];
            for (int k = c; k < 4; ++k) J[r][k] -= f * J[c][k];
        }
    }
    EXPECT_NEAR(det, 1.0, 1e-6);
}

TEST(Leapfrog, ReflectionAtBoundsStaysReversible) {
    const std::vector<Bounds> bounds{{0.0, 1.0}};
    auto flat = [](std::span<const double>, std::span<double> g) {
        g[0] = 0.0;
        return 0.0;
    };
    const std::vector<double> q{0.9}, p{1.0}, g0{0.0};
    const auto fwd = leapfrog(std::span<const double>(q), std::span<const double>(p), 0.3, 4, flat,
                              std::span<const double>(g0), std::span<const Bounds>(bounds));
    // 0.9 -> 1.2 (bounce to 0.8) -> 0.5 -> 0.2 -> -0.1 (bounce to 0.1)
    EXPECT_NEAR(fwd.theta[0], 0.1, 1e-12);
    EXPECT_EQ(fwd.momentum[0], 1.0);
    const std::vector<double> pb{-fwd.momentum[0]};
    const auto back = leapfrog(std::span<const double>(fwd.theta), std::span<const double>(pb), 0.3, 4, flat,
                               std::span<const double>(g0), std::span<const Bounds>(bounds));
    EXPECT_NEAR(back.theta[0], 0.9, 1e-12);
}

TEST(ReflectDrift, Cases) {
    auto run = [](double x, double p, Bounds b) {
        detail::reflect_drift(x, p, b);
        return std::pair{x, p};
    };
    EXPECT_EQ(run(0.5, 1.0, {0.0, 1.0}), (std::pair{0.5, 1.0}));
    auto [x1, p1] = run(1.25, 1.0, {0.0, 1.0});
    EXPECT_NEAR(x1, 0.75, 1e-15);
    EXPECT_EQ(p1, -1.0);
    auto [x2, p2] = run(-0.25, -1.0, {0.0, 1.0});
    EXPECT_NEAR(x2, 0.25, 1e-15);
    EXPECT_EQ(p2, 1.0);
    auto [x3, p3] = run(2.25, 1.0, {0.0, 1.0});  // two bounces
    EXPECT_NEAR(x3, 0.25, 1e-15);
    EXPECT_EQ(p3, 1.0);
    auto [x4, p4] = run(-3.0, -2.0, {0.0, kInf});
    EXPECT_EQ(x4, 3.0);
    EXPECT_EQ(p4, 2.0);
    auto [x5, p5] = run(1e300, 1.0, {0.0, 1.0});
    EXPECT_GE(x5, 0.0);
    EXPECT_LE(x5, 1.0);
    (void)p5;
}

TEST(Hmc, StandardNormal) {
    const auto c = hmc_sample(normal_target(0.0, 1.0), hmc(20000, 3));
    const auto x = c.column(0);
    EXPECT_NEAR(stats::mean(x), 0.0, 4 * mcse(x));
    EXPECT_NEAR(stats::variance(x), 1.0, 0.05);
    EXPECT_GT(c.acceptance_rate, 0.9);
    EXPECT_EQ(c.divergence_count, 0u);
}

TEST(Hmc, ShiftedNormal) {
    const auto c = hmc_sample(normal_target(3.0, 2.0), hmc(20000, 4, 0.3, 15));
    const auto x = c.column(0);
    EXPECT_NEAR(stats::mean(x), 3.0, 4 * mcse(x));
    EXPECT_NEAR(std::sqrt(stats::variance(x)), 2.0, 0.06);
}

TEST(Hmc, HalfNormalWithReflection) {
    const auto c = hmc_sample(normal_target(0.0, 1.0, {0.0, kInf}, 0.5), hmc(20000, 5));
    const auto x = c.column(0);
    for (double v : x) ASSERT_GE(v, 0.0);
    EXPECT_NEAR(stats::mean(x), std::sqrt(2.0 / std::numbers::pi), 4 * mcse(x));
}

TEST(Hmc, HugeStepIsFlaggedDivergent) {
    const auto c = hmc_sample(normal_target(0.0, 0.01, {-kInf, kInf}, 0.0), hmc(200, 6, 1.0, 10));
    EXPECT_GT(c.divergence_count, 0u);
    EXPECT_LT(c.acceptance_rate, 0.1);
}

TEST(Mh, NormalTargets) {
    const auto a = mh_sample(normal_target(0.0, 1.0), mh(40000, 2.4, 7));
    EXPECT_NEAR(stats::mean(a.column(0)), 0.0, 4 * mcse(a.column(0)));
    const auto b = mh_sample(normal_target(3.0, 2.0), mh(40000, 4.8, 8));
    EXPECT_NEAR(stats::mean(b.column(0)), 3.0, 4 * mcse(b.column(0)));
    EXPECT_NEAR(std::sqrt(stats::variance(b.column(0))), 2.0, 0.08);
}

TEST(Mh, TinyProposalAcceptsAlmostEverything) {
    const auto c = mh_sample(normal_target(0.0, 1.0), mh(5000, 1e-8, 9));
    EXPECT_GT(c.acceptance_rate, 0.999);
}

TEST(Samplers, SameSeedSameChain) {
    const auto t = normal_target(1.0, 1.0);
    EXPECT_EQ(hmc_sample(t, hmc(500, 11)), hmc_sample(t, hmc(500, 11)));
    EXPECT_EQ(mh_sample(t, mh(500, 1.0, 11)), mh_sample(t, mh(500, 1.0, 11)));
    EXPECT_NE(hmc_sample(t, hmc(500, 11)).draws, hmc_sample(t, hmc(500, 12)).draws);
}

TEST(Samplers, RunChainsUsesDistinctStreams) {
    auto cfg = hmc(500, 13);
    cfg.n_chains = 3;
    const auto chains = run_chains(normal_target(0.0, 1.0), cfg);
    ASSERT_EQ(chains.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(chains[i].stream, i);
    EXPECT_NE(chains[0].draws, chains[1].draws);
    EXPECT_NE(chains[1].draws, chains[2].draws);
    EXPECT_EQ(run_chains(normal_target(0.0, 1.0), cfg), chains);
}

TEST(Samplers, SingleChainEqualsDirectCall) {
    const auto t = normal_target(0.0, 1.0);
    const auto cfg = hmc(300, 14);
    EXPECT_EQ(run_chains(t, cfg).front(), hmc_sample(t, cfg));
}

TEST(Samplers, ChainsAgreeByRhat) {
    auto cfg = hmc(5000, 15);
    cfg.n_chains = 4;
    const auto chains = run_chains(normal_target(0.0, 1.0), cfg);
    EXPECT_LT(split_rhat(chains, 0), 1.01);
}

TEST(Samplers, ZeroDensityInitRejected) {
    const auto t = normal_target(0.0, 1.0, {0.0, 1.0}, 2.0);
    EXPECT_THROW(hmc_sample(t, hmc(10)), InitializationError);
    EXPECT_THROW(mh_sample(t, mh(10, 0.1)), InitializationError);
}

TEST(Samplers, ConfigValidation) {
    auto bad = hmc(10);
    bad.step_size = 0.0;
    EXPECT_THROW(bad.validate(), DomainError);
    auto bad_mh = mh(10, 0.1);
    bad_mh.proposal_scale = {0.1, 0.2, 0.3};
    EXPECT_THROW(mh_sample(normal_target(0.0, 1.0), bad_mh), DimensionError);
}

// Detailed balance implies symmetric transition flux between regions:
// E[#(i -> j)] = E[#(j -> i)] for a stationary chain.
TEST(Samplers, TransitionFluxIsSymmetricOnGrid) {
    const auto t = normal_target(0.0, 1.0, {-3.0, 3.0}, 0.0);
    auto check = [](const Chain& c) {
        const auto x = c.column(0);
        auto cell = [](double v) { return std::clamp(static_cast<int>(std::floor((v + 3.0) / 6.0 * 21.0)), 0, 20); };
        std::map<std::pair<int, int>, double> flux;
        for (std::size_t i = 1; i < x.size(); ++i) flux[{cell(x[i - 1]), cell(x[i])}] += 1.0;
        int checked = 0;
        for (int i = 0; i < 21; ++i)
            for (int j = i + 1; j < 21; ++j) {
                const double a = flux[{i, j}], b = flux[{j, i}];
                if (a + b < 50) continue;
                ++checked;
                EXPECT_LE(std::abs(a - b), 4.5 * std::sqrt(a + b)) << i << " <-> " << j;
            }
        EXPECT_GT(checked, 20);
    };
    check(mh_sample(t, mh(200000, 1.0, 16)));
    check(hmc_sample(t, hmc(100000, 17, 0.25, 3)));
}

TEST(Samplers, HmcAndMhAgreeOnThreeBinPosterior) {
    const fixtures::ThreeBin f;
    const Model m(f.spec);
    const PosteriorTarget target(m, f.priors, f.obs.main);
    const auto a = hmc_sample(target, fixtures::tuned_hmc(21, 10000));
    const auto b = mh_sample(target, fixtures::tuned_mh(22, 20000));
    for (std::size_t p = 0; p < 2; ++p) {
        const auto x = a.column(p), y = b.column(p);
        const double se = std::hypot(mcse(x), mcse(y));
        EXPECT_NEAR(stats::mean(x), stats::mean(y), 4 * se) << target.names()[p];
    }
}

TEST(HillClimb, ImprovesAndStaysInBounds) {
    const fixtures::ThreeBin f;
    const Model m(f.spec);
    const PosteriorTarget target(m, f.priors, f.obs.main);
    const std::vector<double> start{1.0, 1e-3};
    const auto x = hill_climb(target, start, 5000);
    EXPECT_GT(target.log_density(x), target.log_density(start));
    EXPECT_TRUE(m.in_bounds(x));
    // converges to the same point from a different start
    const auto y = hill_climb(target, {4.0, 0.5}, 5000);
    EXPECT_NEAR(x[0], y[0], 1e-3);
    EXPECT_NEAR(x[1], y[1], 1e-3);
}

TEST(HillClimb, FindsInteriorMaximum) {
    const auto x = hill_climb(normal_target(0.7, 1.0, {0.0, 1.0}, 0.1), {0.1});
    EXPECT_NEAR(x[0], 0.7, 1e-5);
}
