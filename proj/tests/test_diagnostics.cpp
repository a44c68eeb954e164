#include <gtest/gtest.h>

#include <cmath>

#include "histbayes/diagnostics.hpp"
#include "oracles.hpp"

using namespace histbayes;

namespace {

Chain chain_of(const std::vector<double>& x, const std::string& name = "x") {
    Chain c;
    c.param_names = {name};
    c.draws = x;
    c.n_draws = x.size();
    return c;
}

}  // namespace

TEST(Autocorrelation, WhiteNoiseIsWithinBand) {
    const auto x = oracle::iid_normal(20000, 1);
    const auto acf = autocorrelation(x, 20);
    EXPECT_EQ(acf[0], 1.0);
    for (std::size_t k = 1; k <= 20; ++k) EXPECT_LT(std::abs(acf[k]), 4.0 / std::sqrt(20000.0)) << k;
    EXPECT_EQ(required_thinning(x), 1u);
}

TEST(Autocorrelation, Ar1DecaysGeometrically) {
    const double rho = 0.8;
    const auto x = oracle::ar1(rho, 100000, 2);
    const auto acf = autocorrelation(x, 10);
    for (std::size_t k = 1; k <= 10; ++k) EXPECT_NEAR(acf[k], std::pow(rho, static_cast<double>(k)), 0.03) << k;
}

TEST(Autocorrelation, FirstLagWithinBand) {
    const std::vector<double> acf{1.0, 0.5, 0.2, 0.05, -0.08, 0.02};
    EXPECT_EQ(first_lag_within_band(acf, 0.1), 3u);
    const std::vector<double> never{1.0, 0.5, 0.4};
    EXPECT_EQ(first_lag_within_band(never, 0.1), 3u);
}

TEST(Autocorrelation, ErrorCases) {
    const std::vector<double> constant(500, 2.5);
    EXPECT_THROW(autocorrelation(constant, 10), DomainError);
    EXPECT_THROW(effective_sample_size(constant), DomainError);
    const std::vector<double> tiny{1.0, 2.0, 3.0};
    EXPECT_THROW(autocorrelation(tiny, 5), InsufficientDataError);
    EXPECT_THROW(required_thinning(oracle::iid_normal(99, 1)), InsufficientDataError);
}

TEST(Thinning, Ar1NeedsAboutElevenSteps) {
    // 0.8^n <= 0.1 first holds at n = 11
    const auto x = oracle::ar1(0.8, 100000, 3);
    const auto n = required_thinning(x, 0.1);
    EXPECT_GE(n, 9u);
    EXPECT_LE(n, 13u);
    const auto thinned = thin(x, n);
    const auto acf = autocorrelation(thinned, 20);
    for (std::size_t k = 1; k <= 20; ++k) EXPECT_LE(std::abs(acf[k]), 0.1);
    EXPECT_GE(effective_sample_size(thinned) / static_cast<double>(thinned.size()), 0.5);
}

TEST(Thinning, RandomWalkHasNoFiniteThinning) {
    auto x = oracle::iid_normal(2000, 4);
    for (std::size_t i = 1; i < x.size(); ++i) x[i] += x[i - 1];
    EXPECT_THROW(required_thinning(x), NoFiniteThinningError);
}

TEST(Thinning, Composes) {
    const auto x = oracle::iid_normal(1000, 5);
    EXPECT_EQ(thin(thin(x, 3), 4), thin(x, 12));
    const auto c = thin(thin(chain_of(x), 3), 4);
    EXPECT_EQ(c.draws, thin(x, 12));
    EXPECT_EQ(c.thinning_applied, 12u);
    EXPECT_EQ(thin(x, 1), x);
    EXPECT_THROW(thin(chain_of(x), 0), DomainError);
}

TEST(Ess, WhiteNoiseAndAr1) {
    const auto w = oracle::iid_normal(50000, 6);
    EXPECT_NEAR(effective_sample_size(w) / 50000.0, 1.0, 0.1);
    const auto x = oracle::ar1(0.8, 100000, 7);
    // N (1 - ρ) / (1 + ρ)
    EXPECT_NEAR(effective_sample_size(x), 100000.0 / 9.0, 0.15 * 100000.0 / 9.0);
}

TEST(Ess, NeverExceedsLength) {
    const auto x = oracle::ar1(-0.6, 20000, 8);
    EXPECT_LE(effective_sample_size(x), 20000.0);
}

TEST(Rhat, AgreeingChainsNearOne) {
    std::vector<std::vector<double>> chains;
    for (unsigned s = 0; s < 4; ++s) chains.push_back(oracle::iid_normal(5000, 10 + s));
    EXPECT_LT(split_rhat(chains), 1.01);
}

TEST(Rhat, ShiftedChainDetected) {
    std::vector<std::vector<double>> chains{oracle::iid_normal(2000, 20), oracle::iid_normal(2000, 21)};
    for (auto& v : chains[1]) v += 1.0;
    EXPECT_GT(split_rhat(chains), 1.1);
}

TEST(Rhat, DriftWithinChainDetectedBySplitting) {
    auto x = oracle::iid_normal(2000, 22), y = oracle::iid_normal(2000, 23);
    for (std::size_t i = 1000; i < 2000; ++i) {
        x[i] += 2.0;
        y[i] += 2.0;
    }
    EXPECT_GT(split_rhat({x, y}), 1.1);
}

TEST(Rhat, ShapeErrors) {
    EXPECT_THROW(split_rhat({oracle::iid_normal(100, 1)}), ShapeError);
    EXPECT_THROW(split_rhat({oracle::iid_normal(100, 1), oracle::iid_normal(90, 2)}), ShapeError);
    const std::vector<double> constant(100, 1.0);
    EXPECT_THROW(split_rhat({constant, constant}), DomainError);
}

TEST(DiagnoseParameter, SingleAndMultipleChains) {
    const auto one = diagnose_parameter({chain_of(oracle::iid_normal(1000, 30))}, 0);
    EXPECT_TRUE(std::isnan(one.rhat));
    EXPECT_TRUE(to_json(one)["rhat"].is_null());
    EXPECT_EQ(one.required_thinning, 1u);
    EXPECT_EQ(one.acf_raw.size(), 21u);

    const auto two = diagnose_parameter({chain_of(oracle::ar1(0.8, 20000, 31)), chain_of(oracle::ar1(0.8, 20000, 32))}, 0);
    EXPECT_FALSE(std::isnan(two.rhat));
    EXPECT_GT(two.required_thinning, 5u);
    EXPECT_NEAR(two.acf_raw[1], 0.8, 0.05);
    for (std::size_t k = 1; k < two.acf_thinned.size(); ++k) EXPECT_LE(std::abs(two.acf_thinned[k]), 0.1);
    EXPECT_EQ(to_json(two)["required_thinning"], two.required_thinning);
}
