#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "histbayes/distributions.hpp"
#include "histbayes/error.hpp"
#include "histbayes/model.hpp"
#include "histbayes/rng.hpp"
#include "histbayes/samplers.hpp"
#include "histbayes/stats.hpp"

namespace histbayes {

enum class PredictiveKind { Prior, Posterior };

inline std::string_view to_string(PredictiveKind kind) { return kind == PredictiveKind::Prior ? "prior" : "posterior"; }

struct PredictiveSamples {
    PredictiveKind kind = PredictiveKind::Prior;
    std::vector<Counts> draws;
    std::vector<std::string> param_names;
    std::vector<double> theta_draws;  // row-major [draws x params]
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return draws.size(); }
    std::span<const double> theta(std::size_t i) const {
        return std::span<const double>(theta_draws).subspan(i * param_names.size(), param_names.size());
    }
};

/// One θ from the prior, each coordinate restricted to the model bounds.
inline std::vector<double> sample_prior(const Model& model, const PriorSet& priors, Rng& rng) {
    if (!priors.covers(model.parameter_names())) throw MissingPriorError("prior set does not match the model parameters");
    std::vector<double> theta(model.n_parameters());
    for (std::size_t i = 0; i < theta.size(); ++i)
        theta[i] = sample_truncated(priors[i], model.bounds()[i].lo, model.bounds()[i].hi, rng);
    return theta;
}

/// n_cb ~ Poisson(ν_cb(θ)).
inline Counts simulate_counts(const Model& model, std::span<const double> theta, Rng& rng) {
    const auto rates = model.expected_rates<double>(theta);
    Counts out(rates.size());
    for (std::size_t c = 0; c < rates.size(); ++c)
        for (double nu : rates[c]) out[c].push_back(poisson_variate(rng, nu));
    return out;
}

inline PredictiveSamples prior_predictive(const Model& model, const PriorSet& priors, std::size_t n_draws,
                                          std::uint64_t seed) {
    for (const auto& d : priors.distributions()) {
        try {
            check_proper(d);
        } catch (const DomainError& e) {
            throw ImproperPriorError(e.what());
        }
    }
    PredictiveSamples out{PredictiveKind::Prior, {}, model.parameter_names(), {}, seed};
    Rng rng(seed);
    for (std::size_t i = 0; i < n_draws; ++i) {
        const auto theta = sample_prior(model, priors, rng);
        out.draws.push_back(simulate_counts(model, theta, rng));
        out.theta_draws.insert(out.theta_draws.end(), theta.begin(), theta.end());
    }
    return out;
}

inline PredictiveSamples posterior_predictive(const Model& model, const std::vector<Chain>& chains, std::uint64_t seed) {
    std::size_t total = 0;
    for (const auto& c : chains) total += c.n_draws;
    if (total == 0) throw EmptyChainError("posterior predictive needs at least one draw");
    PredictiveSamples out{PredictiveKind::Posterior, {}, model.parameter_names(), {}, seed};
    Rng rng(seed);
    for (const auto& c : chains) {
        if (c.param_names != model.parameter_names()) throw DimensionError("chain parameters do not match the model");
        for (std::size_t i = 0; i < c.n_draws; ++i) {
            const auto theta = c.row(i);
            out.draws.push_back(simulate_counts(model, theta, rng));
            out.theta_draws.insert(out.theta_draws.end(), theta.begin(), theta.end());
        }
    }
    return out;
}

inline PredictiveSamples posterior_predictive(const Model& model, const Chain& chain, std::uint64_t seed) {
    return posterior_predictive(model, std::vector<Chain>{chain}, seed);
}

struct BinSummary {
    std::size_t channel = 0;
    std::size_t bin = 0;
    double mean = 0.0;
    // central intervals
    double lo68 = 0.0, hi68 = 0.0;
    double lo95 = 0.0, hi95 = 0.0;
    double lo99 = 0.0, hi99 = 0.0;
};

inline std::vector<BinSummary> summarize(const PredictiveSamples& p) {
    if (p.draws.empty()) throw EmptyChainError("no predictive draws to summarize");
    std::vector<BinSummary> out;
    const auto& shape = p.draws.front();
    for (std::size_t c = 0; c < shape.size(); ++c) {
        for (std::size_t b = 0; b < shape[c].size(); ++b) {
            std::vector<double> v;
            v.reserve(p.draws.size());
            for (const auto& d : p.draws) v.push_back(static_cast<double>(d[c][b]));
            BinSummary s{c, b, stats::mean(v)};
            s.lo68 = stats::quantile(v, 0.16);
            s.hi68 = stats::quantile(v, 0.84);
            s.lo95 = stats::quantile(v, 0.025);
            s.hi95 = stats::quantile(v, 0.975);
            s.lo99 = stats::quantile(v, 0.005);
            s.hi99 = stats::quantile(v, 0.995);
            out.push_back(s);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Simulation-based calibration

inline constexpr std::size_t kDefaultPosteriorDraws = 63;
inline constexpr std::size_t kRankBins = 20;
inline constexpr double kCalibrationAlpha = 0.01;
inline constexpr double kMaxFailureFraction = 0.05;
inline constexpr std::size_t kMinPseudoExperiments = 100;

struct CalibrationConfig {
    std::size_t n_pseudo = 300;
    SamplerConfig sampler;  // per pseudo-experiment; n_chains is ignored
    std::size_t posterior_draws = kDefaultPosteriorDraws;  // L
    std::uint64_t seed = 0;
    std::size_t rank_bins = kRankBins;
    double alpha = kCalibrationAlpha;
};

struct CalibrationComparison {
    double ks_statistic = 0.0;
    double ks_critical = 0.0;
    double ks_pvalue = 0.0;
    double chi2_statistic = 0.0;
    double chi2_dof = 0.0;
    double chi2_pvalue = 0.0;
    std::vector<std::size_t> rank_histogram;
};

struct CalibrationResult {
    std::size_t n_pseudo = 0;
    std::size_t n_failed = 0;
    std::size_t posterior_draws = 0;  // L
    std::vector<std::string> param_names;
    std::vector<double> true_draws;                  // θ_i per successful experiment, row-major
    std::vector<double> aggregated_posterior_draws;  // L rows per successful experiment
    std::vector<double> prior_reference_draws;       // fresh prior draws, same row count
    std::vector<std::vector<std::size_t>> rank_statistics;  // [param][experiment], each in [0, L]
    std::vector<CalibrationComparison> comparison;          // per parameter
    std::vector<std::string> failures;                      // "experiment i: message"

    std::size_t n_params() const noexcept { return param_names.size(); }

    std::vector<double> column(const std::vector<double>& rows, std::size_t param) const {
        std::vector<double> out;
        for (std::size_t i = param; i < rows.size(); i += n_params()) out.push_back(rows[i]);
        return out;
    }

    bool ranks_uniform() const {
        return std::all_of(comparison.begin(), comparison.end(),
                           [](const auto& c) { return c.chi2_pvalue > kCalibrationAlpha; });
    }
    bool pooled_matches_prior() const {
        return std::all_of(comparison.begin(), comparison.end(),
                           [](const auto& c) { return c.ks_statistic < c.ks_critical; });
    }
};

/// Pearson chi-square uniformity test of ranks in [0, L] over `bins` groups of
/// consecutive rank values; expected counts follow the group sizes.
inline CalibrationComparison rank_uniformity(const std::vector<std::size_t>& ranks, std::size_t L, std::size_t bins) {
    const std::size_t n_values = L + 1;
    const std::size_t n_bins = std::min(bins, n_values);
    CalibrationComparison c;
    c.rank_histogram.assign(n_bins, 0);
    std::vector<double> width(n_bins, 0.0);
    for (std::size_t v = 0; v < n_values; ++v) width[v * n_bins / n_values] += 1.0;
    for (std::size_t r : ranks) c.rank_histogram[std::min(r, L) * n_bins / n_values] += 1;
    std::vector<double> observed(c.rank_histogram.begin(), c.rank_histogram.end());
    std::vector<double> expected(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b)
        expected[b] = static_cast<double>(ranks.size()) * width[b] / static_cast<double>(n_values);
    c.chi2_statistic = stats::chi_square_statistic(observed, expected);
    c.chi2_dof = static_cast<double>(n_bins - 1);
    c.chi2_pvalue = stats::chi_square_sf(c.chi2_statistic, c.chi2_dof);
    return c;
}

/// Runs n_pseudo pseudo-experiments: θ_i from the prior, pseudo-data from the
/// model at θ_i, a posterior run on the pseudo-data, and L posterior draws
/// taken at an even stride. Pools the posterior draws against fresh prior
/// draws (KS) and tests the ranks of θ_i among its draws for uniformity.
///
/// Experiment i draws θ_i and its pseudo-data from stream i of the seed
/// (long-jump separated) and samples from that stream jumped once.
inline CalibrationResult calibration_run(const Model& model, const PriorSet& priors, const CalibrationConfig& cfg) {
    if (cfg.n_pseudo < kMinPseudoExperiments)
        throw DomainError("n_pseudo must be at least " + std::to_string(kMinPseudoExperiments));
    cfg.sampler.validate();
    const std::size_t L = cfg.posterior_draws;
    if (L == 0 || L > cfg.sampler.n_draws)
        throw DomainError("posterior_draws must be in [1, n_draws] (got " + std::to_string(L) + ")");
    const std::size_t stride = cfg.sampler.n_draws / L;
    const std::size_t dim = model.n_parameters();

    std::vector<Rng> streams;
    Rng base(cfg.seed);
    for (std::size_t i = 0; i < cfg.n_pseudo; ++i) {
        streams.push_back(base);
        base.long_jump();
    }
    Rng reference_rng = base;

    struct Experiment {
        std::vector<double> truth;
        std::vector<double> draws;  // L x dim
        std::string error;
    };
    std::vector<Experiment> experiments(cfg.n_pseudo);

    auto run_one = [&](std::size_t i) {
        auto& ex = experiments[i];
        try {
            Rng rng = streams[i];
            ex.truth = sample_prior(model, priors, rng);
            PosteriorTarget target(model, priors, simulate_counts(model, ex.truth, rng));
            Rng sampler_rng = streams[i];
            sampler_rng.jump();
            SamplerConfig sc = cfg.sampler;
            sc.n_chains = 1;
            sc.seed = cfg.seed;
            const Chain chain = sample_chain(target, sc, sampler_rng, i);
            for (std::size_t k = 0; k < L; ++k) {
                const auto r = chain.row(k * stride);
                ex.draws.insert(ex.draws.end(), r.begin(), r.end());
            }
        } catch (const std::exception& e) {
            ex.error = e.what();
        }
    };
    const std::size_t n_threads =
        std::min<std::size_t>(cfg.n_pseudo, std::max(1u, std::thread::hardware_concurrency()));
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < cfg.n_pseudo; ++i) run_one(i);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < cfg.n_pseudo; i += n_threads) run_one(i);
            });
    }

    CalibrationResult res;
    res.n_pseudo = cfg.n_pseudo;
    res.posterior_draws = L;
    res.param_names = model.parameter_names();
    res.rank_statistics.assign(dim, {});
    for (std::size_t i = 0; i < cfg.n_pseudo; ++i) {
        const auto& ex = experiments[i];
        if (!ex.error.empty()) {
            ++res.n_failed;
            res.failures.push_back("experiment " + std::to_string(i) + ": " + ex.error);
            continue;
        }
        res.true_draws.insert(res.true_draws.end(), ex.truth.begin(), ex.truth.end());
        res.aggregated_posterior_draws.insert(res.aggregated_posterior_draws.end(), ex.draws.begin(), ex.draws.end());
        for (std::size_t p = 0; p < dim; ++p) {
            std::size_t rank = 0;
            for (std::size_t k = 0; k < L; ++k) rank += ex.draws[k * dim + p] < ex.truth[p] ? 1 : 0;
            res.rank_statistics[p].push_back(rank);
        }
    }
    if (static_cast<double>(res.n_failed) > kMaxFailureFraction * static_cast<double>(cfg.n_pseudo))
        throw CalibrationAbort(std::to_string(res.n_failed) + " of " + std::to_string(cfg.n_pseudo) +
                               " pseudo-experiments failed to sample" +
                               (res.failures.empty() ? std::string() : "; first: " + res.failures.front()));

    const std::size_t n_ok = cfg.n_pseudo - res.n_failed;
    const std::size_t n_pooled = n_ok * L;
    for (std::size_t i = 0; i < n_pooled; ++i) {
        const auto theta = sample_prior(model, priors, reference_rng);
        res.prior_reference_draws.insert(res.prior_reference_draws.end(), theta.begin(), theta.end());
    }

    for (std::size_t p = 0; p < dim; ++p) {
        CalibrationComparison c = rank_uniformity(res.rank_statistics[p], L, cfg.rank_bins);
        c.ks_statistic = stats::ks_two_sample(res.column(res.aggregated_posterior_draws, p),
                                              res.column(res.prior_reference_draws, p));
        // the L pooled draws of one experiment share its pseudo-data, so the
        // pooled side counts as n_ok independent observations
        c.ks_critical = stats::ks_critical_two_sample(cfg.alpha, n_ok, n_pooled);
        const double n_eff = static_cast<double>(n_ok) * static_cast<double>(n_pooled) /
                             static_cast<double>(n_ok + n_pooled);
        c.ks_pvalue = stats::ks_pvalue(c.ks_statistic, n_eff);
        res.comparison.push_back(std::move(c));
    }
    return res;
}

inline nlohmann::json to_json(const CalibrationResult& r) {
    nlohmann::json j;
    j["n_pseudo"] = r.n_pseudo;
    j["n_failed"] = r.n_failed;
    j["posterior_draws"] = r.posterior_draws;
    j["failures"] = r.failures;
    j["parameters"] = nlohmann::json::array();
    for (std::size_t p = 0; p < r.n_params(); ++p) {
        const auto& c = r.comparison[p];
        j["parameters"].push_back({{"parameter", r.param_names[p]},
                                   {"ks_statistic", c.ks_statistic},
                                   {"ks_critical", c.ks_critical},
                                   {"ks_pvalue", c.ks_pvalue},
                                   {"chi2_statistic", c.chi2_statistic},
                                   {"chi2_dof", c.chi2_dof},
                                   {"chi2_pvalue", c.chi2_pvalue},
                                   {"rank_histogram", c.rank_histogram},
                                   {"rank_statistics", r.rank_statistics[p]}});
    }
    j["ranks_uniform"] = r.ranks_uniform();
    j["pooled_matches_prior"] = r.pooled_matches_prior();
    return j;
}

}  // namespace histbayes
