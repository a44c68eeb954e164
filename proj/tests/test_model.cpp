#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "histbayes/model.hpp"
#include "oracles.hpp"

using namespace histbayes;

namespace {

// s=[5,10] with normfactor eta, b=[50,50] with normsys_gauss chi
std::pair<ModelSpec, ObservationSet> two_bin() {
    return parse_workspace(R"({
        "channels": [{"name": "sr", "samples": [
            {"name": "sig", "data": [5.0, 10.0], "modifiers": [{"name": "eta", "type": "normfactor"}]},
            {"name": "bkg", "data": [50.0, 50.0], "modifiers": [{"name": "chi", "type": "normsys_gauss"}]}]}],
        "observations": [{"name": "sr", "data": [52, 61]}],
        "aux": {"chi": {"a": 1.0, "sigma": 0.1}}})");
}

Model single_bin(double s) {
    Channel ch{"c", {Sample{"sig", {s}, {{ModifierKind::FreeNorm, "eta"}}}}, 1};
    return Model(make_model_spec({ch}));
}

ModelSpec parameter_only(const std::string& name) {
    ModelSpec spec;
    spec.parameter_order = {name};
    spec.parameters = {ParameterInfo{name, ParameterKind::Free, name, 0}};
    return spec;
}

PriorSet single_prior(const std::string& name, Distribution d) {
    PriorSet p;
    p.add(name, d);
    return p;
}

}  // namespace

TEST(ExpectedRates, HandEvaluatedExamples) {
    const Model m(two_bin().first);
    const std::vector<double> unit{1.0, 1.0};
    EXPECT_EQ(m.expected_rates<double>(unit), (std::vector<std::vector<double>>{{55.0, 60.0}}));
    const std::vector<double> t{0.7, 1.2};
    const auto nu = m.expected_rates<double>(t);
    EXPECT_NEAR(nu[0][0], 63.5, 1e-12);
    EXPECT_NEAR(nu[0][1], 67.0, 1e-12);
}

TEST(ExpectedRates, ZeroFreeFactorsAnnihilate) {
    const auto spec = parse_workspace(R"({
        "channels": [{"name": "c", "samples": [
            {"name": "a", "data": [3.0, 4.0], "modifiers": [{"name": "x", "type": "normfactor"}]},
            {"name": "b", "data": [7.0, 1.0], "modifiers": [{"name": "y", "type": "normfactor"}]}]}],
        "observations": [{"name": "c", "data": [0, 0]}]})").first;
    const Model m(spec);
    const std::vector<double> zero{0.0, 0.0};
    EXPECT_EQ(m.expected_rates<double>(zero), (std::vector<std::vector<double>>{{0.0, 0.0}}));
}

TEST(ExpectedRates, DimensionMismatch) {
    const Model m(two_bin().first);
    const std::vector<double> t{1.0};
    EXPECT_THROW(m.expected_rates<double>(t), DimensionError);
}

TEST(ExpectedRates, PoissonShapeFactorsPerBin) {
    const auto spec = parse_workspace(R"({
        "channels": [{"name": "c", "samples": [
            {"name": "sig", "data": [1.0, 2.0], "modifiers": [{"name": "mu", "type": "normfactor"}]},
            {"name": "bkg", "data": [10.0, 20.0], "modifiers": [{"name": "stat", "type": "shapesys_poisson"}]}]}],
        "observations": [{"name": "c", "data": [11, 22]}],
        "aux": {"stat": {"a": [9, 21]}}})").first;
    const Model m(spec);
    const std::vector<double> t{2.0, 0.5, 1.5};
    const auto nu = m.expected_rates<double>(t);
    EXPECT_DOUBLE_EQ(nu[0][0], 2.0 + 5.0);
    EXPECT_DOUBLE_EQ(nu[0][1], 4.0 + 30.0);
}

TEST(LogLikelihood, SingleBinExamples) {
    const Model m = single_bin(1.0);
    auto ll = [&](double nu, std::int64_t n) {
        const std::vector<double> t{nu};
        return log_likelihood_main(m, t, Counts{{n}});
    };
    EXPECT_NEAR(ll(3.0, 3), 3 * std::log(3.0) - 3.0 - std::log(6.0), 1e-13);
    EXPECT_NEAR(ll(3.0, 3), oracle::poisson_logpmf(3, 3.0), 1e-13);
    EXPECT_EQ(ll(0.0, 0), 0.0);
    EXPECT_EQ(ll(0.0, 2), -INFINITY);
    EXPECT_THROW(ll(-1.0, 2), DomainError);
}

TEST(LogPosterior, ParametersWithoutChannels) {
    const Model m(parameter_only("eta"));
    const auto priors = single_prior("eta", Normal{0.0, 1.0});
    const std::vector<double> t{0.0};
    EXPECT_NEAR(log_posterior_unnorm(m, t, priors, Counts{}), -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
}

TEST(LogPosterior, ThreeBinMatchesDirectSummation) {
    const fixtures::ThreeBin f;
    const Model m(f.spec);
    const oracle::ThreeBin ref;
    for (const auto& t : std::vector<std::vector<double>>{{0.5, 0.5}, {1.0, 1.0}, {2.5, 0.9}, {0.01, 1.3}}) {
        EXPECT_NEAR(log_posterior_unnorm(m, t, f.priors, f.obs.main), ref.log_posterior(t[0], t[1]),
                    1e-10 * std::abs(ref.log_posterior(t[0], t[1])));
    }
}

TEST(LogPosterior, OutsideSupportIsNegInf) {
    const fixtures::ThreeBin f;
    const Model m(f.spec);
    const std::vector<double> below{-0.1, 1.0}, above{10.5, 1.0}, neg_chi{1.0, -0.01};
    EXPECT_EQ(log_posterior_unnorm(m, below, f.priors, f.obs.main), -INFINITY);
    EXPECT_EQ(log_posterior_unnorm(m, above, f.priors, f.obs.main), -INFINITY);
    EXPECT_EQ(log_posterior_unnorm(m, neg_chi, f.priors, f.obs.main), -INFINITY);
}

TEST(LogPosterior, MissingPriors) {
    const fixtures::ThreeBin f;
    const Model m(f.spec);
    const std::vector<double> t{1.0, 1.0};
    EXPECT_THROW(log_posterior_unnorm(m, t, single_prior("mu", Normal{0, 1}), f.obs.main), MissingPriorError);
}

TEST(Gradient, SingleBinHandDerivative) {
    const Model m = single_bin(5.0);
    // flat prior over the support so only the Poisson term contributes
    const auto priors = single_prior("eta", Uniform{0.0, 10.0});
    const std::vector<double> t{1.0};
    const auto g = grad_log_posterior(m, t, priors, Counts{{10}});
    EXPECT_NEAR(g[0], 5.0, 1e-12);
}

TEST(Gradient, ZeroAtPriorMeanWithoutData) {
    const Model m(parameter_only("eta"));
    const auto priors = single_prior("eta", Normal{3.0, 1.5});
    const std::vector<double> t{3.0};
    EXPECT_EQ(grad_log_posterior(m, t, priors, Counts{})[0], 0.0);
}

TEST(Gradient, MatchesCentralDifferences) {
    const fixtures::ThreeBin f;
    const Model m(f.spec);
    auto lp = [&](const std::vector<double>& x) { return log_posterior_unnorm(m, x, f.priors, f.obs.main); };
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> eta(0.05, 5.0), chi(0.5, 1.6);
    for (int trial = 0; trial < 50; ++trial) {
        const std::vector<double> t{eta(gen), chi(gen)};
        const auto g = grad_log_posterior(m, t, f.priors, f.obs.main);
        for (std::size_t i = 0; i < 2; ++i) {
            const double fd = oracle::central_difference(lp, t, i, 1e-5);
            EXPECT_NEAR(g[i], fd, 1e-6 * (1.0 + std::abs(g[i]))) << "trial " << trial << " param " << i;
        }
    }
}

TEST(Gradient, RejectsBoundary) {
    const fixtures::ThreeBin f;
    const Model m(f.spec);
    const std::vector<double> t{0.0, 1.0};
    EXPECT_THROW(grad_log_posterior(m, t, f.priors, f.obs.main), DomainError);
}

TEST(Model, RatesAreLinearInEachFreeFactor) {
    const Model m(two_bin().first);
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (int i = 0; i < 20; ++i) {
        const double eta = u(gen), chi = u(gen), k = u(gen);
        const std::vector<double> a{eta, chi}, b{k * eta, chi}, z{0.0, chi};
        const auto na = m.expected_rates<double>(a), nb = m.expected_rates<double>(b), nz = m.expected_rates<double>(z);
        for (std::size_t j = 0; j < 2; ++j)
            EXPECT_NEAR(nb[0][j] - nz[0][j], k * (na[0][j] - nz[0][j]), 1e-10);
    }
}

TEST(Model, LogLikelihoodAddsOverChannels) {
    const auto [spec, obs] = parse_workspace(R"({
        "channels": [
            {"name": "a", "samples": [{"name": "s", "data": [4.0, 2.0], "modifiers": [{"name": "mu", "type": "normfactor"}]}]},
            {"name": "b", "samples": [{"name": "s", "data": [9.0], "modifiers": [{"name": "mu", "type": "normfactor"}]}]}],
        "observations": [{"name": "a", "data": [3, 1]}, {"name": "b", "data": [12]}]})");
    const Model m(spec);
    const std::vector<double> t{1.3};
    const double expect = oracle::poisson_logpmf(3, 5.2) + oracle::poisson_logpmf(1, 2.6) + oracle::poisson_logpmf(12, 11.7);
    EXPECT_NEAR(log_likelihood_main(m, t, obs.main), expect, 1e-12);
}

TEST(Model, SampleOrderDoesNotChangePosterior) {
    const auto [spec, obs] = two_bin();
    auto swapped = spec.channels;
    std::swap(swapped[0].samples[0], swapped[0].samples[1]);
    const Model m1(spec), m2(make_model_spec(swapped));
    ASSERT_EQ(m1.parameter_names(), m2.parameter_names());
    const auto p = build_priors(spec, {{"eta", Normal{1.0, 3.0}}}, obs);
    for (const auto& t : std::vector<std::vector<double>>{{0.3, 1.1}, {2.0, 0.95}})
        EXPECT_NEAR(log_posterior_unnorm(m1, t, p, obs.main), log_posterior_unnorm(m2, t, p, obs.main), 1e-12);
}
