#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "histbayes/error.hpp"
#include "histbayes/samplers.hpp"

namespace histbayes {

inline constexpr double kDefaultThinBand = 0.1;
inline constexpr std::size_t kThinningMaxLag = 20;

struct AcfReport {
    std::string parameter;
    std::vector<double> acf;  // lags 0..max_lag
    double threshold_band = kDefaultThinBand;
    std::size_t first_lag_within_band = 0;

    std::size_t max_lag() const noexcept { return acf.empty() ? 0 : acf.size() - 1; }
};

/// Sample autocorrelation at lags 0..max_lag with the biased (divide by N)
/// autocovariance, so acf[0] == 1 and |acf[k]| <= 1.
inline std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
    const std::size_t n = x.size();
    if (max_lag < 1 || n <= max_lag)
        throw InsufficientDataError("autocorrelation needs more than max_lag = " + std::to_string(max_lag) +
                                    " draws, got " + std::to_string(n));
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> centered(n);
    double c0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        centered[i] = x[i] - mean;
        c0 += centered[i] * centered[i];
    }
    if (!(c0 > 0.0)) throw DomainError("zero variance: autocorrelation is undefined for a constant chain");
    std::vector<double> acf(max_lag + 1);
    acf[0] = 1.0;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double ck = 0.0;
        for (std::size_t i = 0; i + k < n; ++i) ck += centered[i] * centered[i + k];
        acf[k] = std::clamp(ck / c0, -1.0, 1.0);
    }
    return acf;
}

/// Smallest k with |acf[j]| <= band for every j in [k, max_lag]; max_lag + 1 if none.
inline std::size_t first_lag_within_band(std::span<const double> acf, double band) {
    std::size_t k = acf.size();
    while (k > 0 && std::abs(acf[k - 1]) <= band) --k;
    return k;
}

inline AcfReport autocorrelation(const Chain& chain, std::size_t param, std::size_t max_lag,
                                 double band = kDefaultThinBand) {
    AcfReport r;
    r.parameter = chain.param_names.at(param);
    r.acf = autocorrelation(chain.column(param), max_lag);
    r.threshold_band = band;
    r.first_lag_within_band = first_lag_within_band(r.acf, band);
    return r;
}

inline AcfReport autocorrelation(const Chain& chain, const std::string& parameter, std::size_t max_lag,
                                 double band = kDefaultThinBand) {
    return autocorrelation(chain, chain.param_index(parameter), max_lag, band);
}

/// Keeps draws 0, n, 2n, ...
inline Chain thin(const Chain& chain, std::size_t n) {
    if (n == 0) throw DomainError("thinning factor must be positive");
    Chain out = chain;
    out.draws.clear();
    out.n_draws = 0;
    for (std::size_t i = 0; i < chain.n_draws; i += n) {
        const auto r = chain.row(i);
        out.draws.insert(out.draws.end(), r.begin(), r.end());
        ++out.n_draws;
    }
    out.thinning_applied = chain.thinning_applied * n;
    return out;
}

inline std::vector<double> thin(std::span<const double> x, std::size_t n) {
    std::vector<double> out;
    for (std::size_t i = 0; i < x.size(); i += n) out.push_back(x[i]);
    return out;
}

/// Smallest n for which the n-thinned series keeps |acf[k]| <= band for
/// 1 <= k <= min(20, length / 10).
inline std::size_t required_thinning(std::span<const double> x, double band = kDefaultThinBand) {
    if (x.size() < 100) throw InsufficientDataError("required_thinning needs at least 100 draws");
    const std::size_t n_max = x.size() / 10;
    for (std::size_t n = 1; n <= n_max; ++n) {
        const auto thinned = thin(x, n);
        const std::size_t max_lag = std::min(kThinningMaxLag, thinned.size() / 10);
        if (max_lag < 1) break;
        const auto acf = autocorrelation(thinned, max_lag);
        bool ok = true;
        for (std::size_t k = 1; k <= max_lag && ok; ++k) ok = std::abs(acf[k]) <= band;
        if (ok) return n;
    }
    throw NoFiniteThinningError("autocorrelation stays above " + std::to_string(band) + " for every thinning up to " +
                                std::to_string(n_max));
}

inline std::size_t required_thinning(const Chain& chain, std::size_t param, double band = kDefaultThinBand) {
    return required_thinning(chain.column(param), band);
}

/// Chain-level thinning: the largest per-parameter requirement.
inline std::size_t required_thinning(const Chain& chain, double band = kDefaultThinBand) {
    std::size_t n = 1;
    for (std::size_t p = 0; p < chain.n_params(); ++p) n = std::max(n, required_thinning(chain, p, band));
    return n;
}

/// N / (1 + 2 Σ ρ_k), truncated with Geyer's initial monotone positive
/// sequence over lag pairs. Never exceeds N.
inline double effective_sample_size(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 100) throw InsufficientDataError("effective_sample_size needs at least 100 draws");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> centered(n);
    double c0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        centered[i] = x[i] - mean;
        c0 += centered[i] * centered[i];
    }
    if (!(c0 > 0.0)) throw DomainError("zero variance: effective sample size is undefined for a constant chain");
    auto rho = [&](std::size_t k) {
        double ck = 0.0;
        for (std::size_t i = 0; i + k < n; ++i) ck += centered[i] * centered[i + k];
        return ck / c0;
    };

    double tau = -1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        double pair = rho(2 * k) + rho(2 * k + 1);
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
    }
    tau = std::max(tau, 1.0);
    return static_cast<double>(n) / tau;
}

inline double effective_sample_size(const Chain& chain, std::size_t param) {
    return effective_sample_size(chain.column(param));
}

inline double effective_sample_size(const Chain& chain, const std::string& parameter) {
    return effective_sample_size(chain, chain.param_index(parameter));
}

/// Split-R̂: every chain is halved and the between/within variance ratio of
/// the 2m halves is reported.
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
    if (chains.size() < 2) throw ShapeError("split_rhat needs at least two chains");
    const std::size_t len = chains.front().size();
    for (const auto& c : chains)
        if (c.size() != len) throw ShapeError("split_rhat needs chains of equal length");
    if (len < 4) throw ShapeError("split_rhat needs chains of at least 4 draws");

    const std::size_t half = len / 2;
    std::vector<double> means;
    std::vector<double> vars;
    for (const auto& c : chains) {
        for (std::size_t h = 0; h < 2; ++h) {
            const std::size_t start = h == 0 ? 0 : len - half;  // drops the middle draw of odd chains
            double m = 0.0;
            for (std::size_t i = 0; i < half; ++i) m += c[start + i];
            m /= static_cast<double>(half);
            double v = 0.0;
            for (std::size_t i = 0; i < half; ++i) v += (c[start + i] - m) * (c[start + i] - m);
            v /= static_cast<double>(half - 1);
            means.push_back(m);
            vars.push_back(v);
        }
    }
    const double m_chains = static_cast<double>(means.size());
    const double n = static_cast<double>(half);
    double grand = 0.0;
    for (double m : means) grand += m;
    grand /= m_chains;
    double b = 0.0;
    for (double m : means) b += (m - grand) * (m - grand);
    b *= n / (m_chains - 1.0);
    double w = 0.0;
    for (double v : vars) w += v;
    w /= m_chains;
    if (!(w > 0.0)) throw DomainError("zero within-chain variance: split-R-hat is undefined");
    const double var_plus = (n - 1.0) / n * w + b / n;
    return std::sqrt(var_plus / w);
}

inline double split_rhat(const std::vector<Chain>& chains, std::size_t param) {
    std::vector<std::vector<double>> cols;
    for (const auto& c : chains) cols.push_back(c.column(param));
    return split_rhat(cols);
}

inline double split_rhat(const std::vector<Chain>& chains, const std::string& parameter) {
    if (chains.empty()) throw ShapeError("split_rhat needs at least two chains");
    return split_rhat(chains, chains.front().param_index(parameter));
}

/// Per-parameter diagnostics over a set of chains of one run.
struct ParameterDiagnostics {
    std::string parameter;
    std::vector<double> acf_raw;      // averaged over chains
    std::vector<double> acf_thinned;  // after thinning by required_thinning
    double ess = 0.0;                 // summed over chains
    double rhat = std::numeric_limits<double>::quiet_NaN();  // NaN for a single chain
    std::size_t required_thinning = 1;
};

/// Averages per-chain ACFs, sums ESS, takes the largest thinning requirement.
inline ParameterDiagnostics diagnose_parameter(const std::vector<Chain>& chains, std::size_t param,
                                               double band = kDefaultThinBand) {
    if (chains.empty()) throw InsufficientDataError("no chains to diagnose");
    ParameterDiagnostics d;
    d.parameter = chains.front().param_names.at(param);
    for (const auto& c : chains) d.required_thinning = std::max(d.required_thinning, required_thinning(c, param, band));
    const std::size_t max_lag = std::min(kThinningMaxLag, chains.front().n_draws / 10);
    d.acf_raw.assign(max_lag + 1, 0.0);
    std::size_t thinned_len = chains.front().n_draws;
    for (const auto& c : chains) thinned_len = std::min(thinned_len, thin(c, d.required_thinning).n_draws);
    const std::size_t thinned_lag = std::min(max_lag, std::max<std::size_t>(1, thinned_len / 10));
    d.acf_thinned.assign(thinned_lag + 1, 0.0);
    for (const auto& c : chains) {
        const auto col = c.column(param);
        const auto raw = autocorrelation(col, max_lag);
        const auto thinned = autocorrelation(thin(col, d.required_thinning), thinned_lag);
        for (std::size_t k = 0; k < raw.size(); ++k) d.acf_raw[k] += raw[k] / static_cast<double>(chains.size());
        for (std::size_t k = 0; k < thinned.size(); ++k) d.acf_thinned[k] += thinned[k] / static_cast<double>(chains.size());
        d.ess += effective_sample_size(col);
    }
    if (chains.size() >= 2) d.rhat = split_rhat(chains, param);
    return d;
}

inline nlohmann::json to_json(const ParameterDiagnostics& d) {
    nlohmann::json j{{"parameter", d.parameter},
                     {"lags", d.acf_raw.size() - 1},
                     {"acf", d.acf_raw},
                     {"acf_thinned", d.acf_thinned},
                     {"ess", d.ess},
                     {"required_thinning", d.required_thinning}};
    j["rhat"] = std::isnan(d.rhat) ? nlohmann::json(nullptr) : nlohmann::json(d.rhat);
    return j;
}

}  // namespace histbayes
