#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "histbayes/error.hpp"
#include "histbayes/model.hpp"
#include "histbayes/rng.hpp"

namespace histbayes {

enum class SamplerKind { HMC, MH };

inline std::string_view to_string(SamplerKind kind) { return kind == SamplerKind::HMC ? "hmc" : "mh"; }

inline constexpr double kDefaultStepSize = 0.1;
inline constexpr std::size_t kDefaultLeapfrogSteps = 20;
inline constexpr double kDefaultProposalScale = 0.1;
inline constexpr double kDivergenceThreshold = 1000.0;

struct SamplerConfig {
    SamplerKind kind = SamplerKind::HMC;
    std::size_t n_draws = 1000;
    std::size_t n_warmup = 500;
    std::size_t n_chains = 1;
    std::uint64_t seed = 0;
    // HMC
    double step_size = kDefaultStepSize;
    std::size_t n_leapfrog = kDefaultLeapfrogSteps;
    // MH; one entry per parameter, or a single entry applied to all
    std::vector<double> proposal_scale = {kDefaultProposalScale};

    void validate() const {
        if (n_draws == 0) throw DomainError("n_draws must be positive");
        if (n_chains == 0) throw DomainError("n_chains must be positive");
        if (kind == SamplerKind::HMC) {
            if (!(step_size > 0.0) || !std::isfinite(step_size)) throw DomainError("step_size must be positive");
            if (n_leapfrog == 0) throw DomainError("n_leapfrog must be positive");
        } else {
            if (proposal_scale.empty()) throw DomainError("proposal_scale must not be empty");
            for (double s : proposal_scale)
                if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("proposal_scale entries must be positive");
        }
    }

    std::vector<double> proposal_scales(std::size_t dim) const {
        if (proposal_scale.size() == 1) return std::vector<double>(dim, proposal_scale.front());
        if (proposal_scale.size() != dim)
            throw DimensionError("proposal_scale has " + std::to_string(proposal_scale.size()) + " entries for " +
                                 std::to_string(dim) + " parameters");
        return proposal_scale;
    }
};

/// Posterior draws of one chain, row-major [n_draws x n_params].
struct Chain {
    std::vector<double> draws;
    std::vector<std::string> param_names;
    std::size_t n_draws = 0;
    SamplerKind kind = SamplerKind::HMC;
    std::size_t accepted = 0;
    double acceptance_rate = 0.0;
    std::size_t divergence_count = 0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::size_t thinning_applied = 1;

    std::size_t n_params() const noexcept { return param_names.size(); }
    double at(std::size_t draw, std::size_t param) const { return draws[draw * n_params() + param]; }
    std::span<const double> row(std::size_t draw) const {
        return std::span<const double>(draws).subspan(draw * n_params(), n_params());
    }

    std::vector<double> column(std::size_t param) const {
        std::vector<double> out(n_draws);
        for (std::size_t i = 0; i < n_draws; ++i) out[i] = at(i, param);
        return out;
    }

    std::size_t param_index(const std::string& name) const {
        for (std::size_t i = 0; i < param_names.size(); ++i)
            if (param_names[i] == name) return i;
        throw DomainError("chain has no parameter '" + name + "'");
    }

    friend bool operator==(const Chain&, const Chain&) = default;
};

template <typename T>
concept Density = requires(const T& t, std::span<const double> x) {
    { t.dimension() } -> std::convertible_to<std::size_t>;
    { t.log_density(x) } -> std::convertible_to<double>;
    { t.initial_point() } -> std::convertible_to<std::vector<double>>;
    { t.bounds() } -> std::convertible_to<std::vector<Bounds>>;
    { t.names() } -> std::convertible_to<std::vector<std::string>>;
};

template <typename T>
concept DifferentiableDensity = Density<T> && requires(const T& t, std::span<const double> x, std::span<double> g) {
    { t.log_density_and_gradient(x, g) } -> std::convertible_to<double>;
};

/// Density assembled from callables; used for analytic targets.
struct FunctionTarget {
    std::vector<std::string> parameter_names;
    std::vector<Bounds> parameter_bounds;
    std::vector<double> init;
    std::function<double(std::span<const double>)> logp;
    std::function<double(std::span<const double>, std::span<double>)> logp_and_grad;

    std::size_t dimension() const { return parameter_names.size(); }
    const std::vector<std::string>& names() const { return parameter_names; }
    const std::vector<Bounds>& bounds() const { return parameter_bounds; }
    std::vector<double> initial_point() const { return init; }
    double log_density(std::span<const double> x) const { return logp(x); }
    double log_density_and_gradient(std::span<const double> x, std::span<double> g) const { return logp_and_grad(x, g); }
};

struct LeapfrogResult {
    std::vector<double> theta;
    std::vector<double> momentum;
    double log_density = kNegInf;
    std::vector<double> gradient;
    /// False when the trajectory left the support; theta/momentum are then
    /// the last in-support state and must be rejected.
    bool in_support = true;
};

namespace detail {

/// Mirrors a drift that crossed a bound back inside and flips the momentum
/// component once per crossing. This keeps the integrator reversible and
/// volume preserving.
inline void reflect_drift(double& x, double& p, Bounds b) {
    if (!std::isfinite(x) || (x >= b.lo && x <= b.hi)) return;
    if (std::isfinite(b.lo) && std::isfinite(b.hi)) {
        const double w = b.hi - b.lo;
        const double crossings = std::floor((x - b.lo) / w);
        const double r = (x - b.lo) - crossings * w;
        const bool odd = std::fmod(std::abs(crossings), 2.0) == 1.0;
        x = odd ? b.hi - r : b.lo + r;
        if (odd) p = -p;
        return;
    }
    x = x < b.lo ? 2.0 * b.lo - x : 2.0 * b.hi - x;
    p = -p;
}

}  // namespace detail

/// Leapfrog integration with a precomputed gradient at the start point.
/// `fn(theta, grad)` returns the log density and fills its gradient. With
/// `bounds`, position updates are reflected at the bounds.
template <typename GradFn>
LeapfrogResult leapfrog(std::span<const double> theta, std::span<const double> momentum, double step_size,
                        std::size_t n_steps, GradFn&& fn, std::span<const double> start_gradient,
                        std::span<const Bounds> bounds = {}) {
    const std::size_t dim = theta.size();
    LeapfrogResult r{std::vector<double>(theta.begin(), theta.end()),
                     std::vector<double>(momentum.begin(), momentum.end()), kNegInf,
                     std::vector<double>(start_gradient.begin(), start_gradient.end()), true};
    for (std::size_t i = 0; i < dim; ++i) r.momentum[i] += 0.5 * step_size * r.gradient[i];
    for (std::size_t step = 0; step < n_steps; ++step) {
        for (std::size_t i = 0; i < dim; ++i) {
            r.theta[i] += step_size * r.momentum[i];
            if (!bounds.empty()) detail::reflect_drift(r.theta[i], r.momentum[i], bounds[i]);
        }
        r.log_density = fn(std::span<const double>(r.theta), std::span<double>(r.gradient));
        if (r.log_density == kNegInf || std::isnan(r.log_density)) {
            r.in_support = false;
            return r;
        }
        const double scale = step + 1 == n_steps ? 0.5 * step_size : step_size;
        for (std::size_t i = 0; i < dim; ++i) r.momentum[i] += scale * r.gradient[i];
    }
    return r;
}

/// Leapfrog integration: half momentum step, n_steps alternating position and
/// momentum updates, closing half momentum step.
template <typename GradFn>
LeapfrogResult leapfrog(std::span<const double> theta, std::span<const double> momentum, double step_size,
                        std::size_t n_steps, GradFn&& fn) {
    if (!(step_size > 0.0)) throw DomainError("step_size must be positive");
    std::vector<double> g(theta.size());
    const double lp = fn(theta, std::span<double>(g));
    if (lp == kNegInf) throw DomainError("leapfrog started outside the support");
    return leapfrog(theta, momentum, step_size, n_steps, std::forward<GradFn>(fn), std::span<const double>(g));
}

inline double kinetic_energy(std::span<const double> momentum) {
    double k = 0.0;
    for (double p : momentum) k += 0.5 * p * p;
    return k;
}

namespace detail {

inline void check_gradient(std::span<const double> g) {
    for (double v : g)
        if (!std::isfinite(v)) throw NonFiniteGradientError("non-finite gradient inside the support");
}

inline Chain make_chain(const std::vector<std::string>& names, const SamplerConfig& cfg, std::uint64_t stream) {
    Chain c;
    c.param_names = names;
    c.kind = cfg.kind;
    c.seed = cfg.seed;
    c.stream = stream;
    c.draws.reserve(cfg.n_draws * names.size());
    return c;
}

/// Maps x into [lo, hi] by mirror reflection at finite bounds.
inline double reflect(double x, Bounds b) {
    const bool has_lo = std::isfinite(b.lo);
    const bool has_hi = std::isfinite(b.hi);
    if (has_lo && has_hi) {
        const double w = b.hi - b.lo;
        double y = std::fmod(x - b.lo, 2.0 * w);
        if (y < 0.0) y += 2.0 * w;
        return b.lo + (y <= w ? y : 2.0 * w - y);
    }
    if (has_lo && x < b.lo) return 2.0 * b.lo - x;
    if (has_hi && x > b.hi) return 2.0 * b.hi - x;
    return x;
}

}  // namespace detail

/// Bounded gradient ascent from `x`: each accepted step stays inside `bounds`
/// and raises the log density, with the step length doubled after a success
/// and halved on failure. Returns `x` unchanged if it has no finite density.
template <DifferentiableDensity Target>
std::vector<double> hill_climb(const Target& target, std::vector<double> x, std::size_t max_iter = 500) {
    const auto& bounds = target.bounds();
    auto inside = [&](const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i)
            if (!(v[i] >= bounds[i].lo && v[i] <= bounds[i].hi)) return false;
        return true;
    };
    std::vector<double> g(x.size()), cand(x.size()), gc(x.size());
    double lp = target.log_density_and_gradient(x, g);
    if (!std::isfinite(lp)) return x;
    double t = 1e-3;
    for (std::size_t it = 0; it < max_iter; ++it) {
        bool moved = false;
        for (t *= 2.0; t > 1e-14; t *= 0.5) {
            for (std::size_t i = 0; i < x.size(); ++i) cand[i] = x[i] + t * g[i];
            if (!inside(cand)) continue;
            const double lc = target.log_density_and_gradient(cand, gc);
            if (std::isfinite(lc) && lc > lp) {
                moved = lc - lp > 1e-12;
                x.swap(cand);
                g.swap(gc);
                lp = lc;
                break;
            }
        }
        if (!moved) break;
    }
    return x;
}

/// Hamiltonian Monte Carlo with identity mass matrix and fixed step size and
/// trajectory length. Trajectories are reflected at the parameter bounds;
/// ones that still hit zero density are rejected. |ΔH| > 1000 marks the
/// transition divergent (also rejected).
///
/// The chain starts from the target's initial point moved uphill by
/// hill_climb, so a fixed step does not stall in the far tail of a narrow
/// posterior.
template <DifferentiableDensity Target>
Chain hmc_sample(const Target& target, const SamplerConfig& cfg, Rng rng, std::uint64_t stream = 0) {
    if (cfg.kind != SamplerKind::HMC) throw DomainError("hmc_sample needs an HMC config");
    cfg.validate();
    const std::size_t dim = target.dimension();
    const std::vector<Bounds> bounds = target.bounds();
    if (bounds.size() != dim) throw DimensionError("bounds have the wrong dimension");
    auto fn = [&target](std::span<const double> x, std::span<double> g) { return target.log_density_and_gradient(x, g); };

    std::vector<double> theta = target.initial_point();
    if (theta.size() != dim) throw DimensionError("initial point has the wrong dimension");
    std::vector<double> grad(dim);
    double lp = fn(theta, grad);
    if (lp == kNegInf || std::isnan(lp)) throw InitializationError("initial point has zero posterior density");
    theta = hill_climb(target, std::move(theta));
    lp = fn(theta, grad);
    detail::check_gradient(grad);

    Chain chain = detail::make_chain(std::vector<std::string>(target.names().begin(), target.names().end()), cfg, stream);
    std::vector<double> momentum(dim);
    const std::size_t total = cfg.n_warmup + cfg.n_draws;
    for (std::size_t it = 0; it < total; ++it) {
        for (auto& p : momentum) p = standard_normal(rng);
        const double h0 = -lp + kinetic_energy(momentum);
        auto traj = leapfrog(std::span<const double>(theta), std::span<const double>(momentum), cfg.step_size,
                             cfg.n_leapfrog, fn, std::span<const double>(grad), std::span<const Bounds>(bounds));
        bool accept = false;
        bool divergent = false;
        if (traj.in_support) {
            detail::check_gradient(traj.gradient);
            const double dh = (-traj.log_density + kinetic_energy(traj.momentum)) - h0;
            if (!std::isfinite(dh) || std::abs(dh) > kDivergenceThreshold) {
                divergent = true;
            } else {
                accept = std::log(uniform01(rng)) < -dh;
            }
        }
        if (accept) {
            theta = std::move(traj.theta);
            grad = std::move(traj.gradient);
            lp = traj.log_density;
        }
        if (it >= cfg.n_warmup) {
            chain.draws.insert(chain.draws.end(), theta.begin(), theta.end());
            chain.accepted += accept ? 1 : 0;
            chain.divergence_count += divergent ? 1 : 0;
        }
    }
    chain.n_draws = cfg.n_draws;
    chain.acceptance_rate = static_cast<double>(chain.accepted) / static_cast<double>(cfg.n_draws);
    return chain;
}

template <DifferentiableDensity Target>
Chain hmc_sample(const Target& target, const SamplerConfig& cfg) {
    return hmc_sample(target, cfg, Rng(cfg.seed), 0);
}

/// Gaussian random-walk Metropolis-Hastings. Proposals are reflected into the
/// parameter bounds, which keeps the proposal symmetric.
template <Density Target>
Chain mh_sample(const Target& target, const SamplerConfig& cfg, Rng rng, std::uint64_t stream = 0) {
    if (cfg.kind != SamplerKind::MH) throw DomainError("mh_sample needs an MH config");
    cfg.validate();
    const std::size_t dim = target.dimension();
    const auto scale = cfg.proposal_scales(dim);
    const auto& bounds = target.bounds();

    std::vector<double> theta = target.initial_point();
    if (theta.size() != dim) throw DimensionError("initial point has the wrong dimension");
    double lp = target.log_density(theta);
    if (lp == kNegInf || std::isnan(lp)) throw InitializationError("initial point has zero posterior density");

    Chain chain = detail::make_chain(std::vector<std::string>(target.names().begin(), target.names().end()), cfg, stream);
    std::vector<double> proposal(dim);
    const std::size_t total = cfg.n_warmup + cfg.n_draws;
    for (std::size_t it = 0; it < total; ++it) {
        for (std::size_t i = 0; i < dim; ++i)
            proposal[i] = detail::reflect(theta[i] + scale[i] * standard_normal(rng), bounds[i]);
        const double lp_new = target.log_density(proposal);
        bool accept = false;
        if (lp_new != kNegInf && !std::isnan(lp_new)) accept = std::log(uniform01(rng)) < lp_new - lp;
        if (accept) {
            theta.swap(proposal);
            lp = lp_new;
        }
        if (it >= cfg.n_warmup) {
            chain.draws.insert(chain.draws.end(), theta.begin(), theta.end());
            chain.accepted += accept ? 1 : 0;
        }
    }
    chain.n_draws = cfg.n_draws;
    chain.acceptance_rate = static_cast<double>(chain.accepted) / static_cast<double>(cfg.n_draws);
    return chain;
}

template <Density Target>
Chain mh_sample(const Target& target, const SamplerConfig& cfg) {
    return mh_sample(target, cfg, Rng(cfg.seed), 0);
}

/// Dispatches on cfg.kind.
template <DifferentiableDensity Target>
Chain sample_chain(const Target& target, const SamplerConfig& cfg, Rng rng, std::uint64_t stream = 0) {
    return cfg.kind == SamplerKind::HMC ? hmc_sample(target, cfg, std::move(rng), stream)
                                        : mh_sample(target, cfg, std::move(rng), stream);
}

/// Runs cfg.n_chains chains, chain i on stream i of cfg.seed, concurrently.
/// Results are ordered by chain index; the first failing chain's error is
/// rethrown as a ChainError.
template <DifferentiableDensity Target>
std::vector<Chain> run_chains(const Target& target, const SamplerConfig& cfg) {
    cfg.validate();
    std::vector<Chain> chains(cfg.n_chains);
    std::vector<std::exception_ptr> errors(cfg.n_chains);
    std::vector<Rng> streams;
    Rng base(cfg.seed);
    for (std::size_t i = 0; i < cfg.n_chains; ++i) {
        streams.push_back(base);
        base.jump();
    }
    auto work = [&](std::size_t i) {
        try {
            chains[i] = sample_chain(target, cfg, streams[i], i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const std::size_t n_threads = std::min<std::size_t>(cfg.n_chains, std::max(1u, std::thread::hardware_concurrency()));
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < cfg.n_chains; ++i) work(i);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < cfg.n_chains; i += n_threads) work(i);
            });
    }
    for (std::size_t i = 0; i < cfg.n_chains; ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
            throw ChainError(i, e.what());
        }
    }
    return chains;
}

}  // namespace histbayes
