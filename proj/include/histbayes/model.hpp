#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "histbayes/distributions.hpp"
#include "histbayes/dual.hpp"
#include "histbayes/error.hpp"
#include "histbayes/priors.hpp"
#include "histbayes/special.hpp"
#include "histbayes/workspace.hpp"

namespace histbayes {

inline constexpr double kFreeLower = 0.0;
inline constexpr double kFreeUpper = 10.0;
inline constexpr double kFreeInit = 1.0;

struct Bounds {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
};

/// Ordered coordinates of θ: free parameters η first, then constrained χ/γ.
struct ParameterSpace {
    std::vector<std::string> names;
    std::vector<ParameterKind> kinds;
    std::vector<Bounds> bounds;
    std::vector<double> init;

    std::size_t size() const noexcept { return names.size(); }
};

/// A ModelSpec compiled for repeated evaluation. Every sample's modifiers are
/// resolved to parameter indices once.
///
/// Support: free parameters live in [0, 10] unless overridden; constrained
/// parameters are multiplicative factors and live in [0, inf).
class Model {
public:
    explicit Model(ModelSpec spec, const std::map<std::string, Bounds>& bound_overrides = {})
        : spec_(std::move(spec)) {
        if (spec_.parameters.size() != spec_.parameter_order.size())
            throw DimensionError("parameter list and parameter_order differ in length");
        std::map<std::string, std::size_t> index_of;
        std::map<std::string, std::size_t> first_shape_index;
        for (std::size_t i = 0; i < spec_.parameters.size(); ++i) {
            const auto& p = spec_.parameters[i];
            index_of.emplace(p.name, i);
            if (p.kind == ParameterKind::PoissonConstrained && !first_shape_index.contains(p.modifier))
                first_shape_index.emplace(p.modifier, i - p.bin);
            Bounds b = p.kind == ParameterKind::Free ? Bounds{kFreeLower, kFreeUpper}
                                                     : Bounds{0.0, std::numeric_limits<double>::infinity()};
            if (auto it = bound_overrides.find(p.name); it != bound_overrides.end()) b = it->second;
            if (!(b.lo < b.hi)) throw DomainError("empty bounds for parameter '" + p.name + "'");
            bounds_.push_back(b);
        }
        for (const auto& ch : spec_.channels) {
            CompiledChannel cc;
            cc.n_bins = ch.n_bins;
            for (const auto& sample : ch.samples) {
                CompiledSample cs;
                cs.nominal = sample.nominal;
                if (cs.nominal.size() != ch.n_bins)
                    throw DimensionError("sample '" + sample.name + "' length differs from channel '" + ch.name + "'");
                for (const auto& mod : sample.modifiers) {
                    if (mod.kind == ModifierKind::PoissonConstrainedShape) {
                        auto it = first_shape_index.find(mod.parameter);
                        if (it == first_shape_index.end())
                            throw DimensionError("modifier '" + mod.parameter + "' has no parameters");
                        cs.shape_first = it->second;
                    } else {
                        auto it = index_of.find(mod.parameter);
                        if (it == index_of.end())
                            throw DimensionError("modifier '" + mod.parameter + "' references an undeclared parameter");
                        cs.norm_params.push_back(it->second);
                    }
                }
                cc.samples.push_back(std::move(cs));
            }
            channels_.push_back(std::move(cc));
        }
    }

    const ModelSpec& spec() const noexcept { return spec_; }
    std::size_t n_parameters() const noexcept { return spec_.parameter_order.size(); }
    std::size_t n_channels() const noexcept { return channels_.size(); }
    const std::vector<std::string>& parameter_names() const noexcept { return spec_.parameter_order; }
    const std::vector<Bounds>& bounds() const noexcept { return bounds_; }

    bool in_bounds(std::span<const double> theta) const {
        for (std::size_t i = 0; i < bounds_.size(); ++i)
            if (!(theta[i] >= bounds_[i].lo && theta[i] <= bounds_[i].hi)) return false;
        return true;
    }

    /// ν_cb = Σ_s nominal_sb · Π (modifier factors of s at bin b).
    template <typename T>
    std::vector<std::vector<T>> expected_rates(std::span<const T> theta) const {
        if (theta.size() != n_parameters())
            throw DimensionError("theta has " + std::to_string(theta.size()) + " entries, model has " +
                                 std::to_string(n_parameters()) + " parameters");
        const T zero = theta.empty() ? T{} : constant_like<T>(0.0, theta[0]);
        std::vector<std::vector<T>> rates;
        rates.reserve(channels_.size());
        for (const auto& ch : channels_) {
            std::vector<T> nu(ch.n_bins, zero);
            for (const auto& s : ch.samples) {
                // whole-sample factor first, then per-bin shape factor
                std::optional<T> norm;
                for (std::size_t idx : s.norm_params) norm = norm ? *norm * theta[idx] : theta[idx];
                for (std::size_t b = 0; b < ch.n_bins; ++b) {
                    if (s.nominal[b] == 0.0) continue;
                    T term = norm ? *norm * s.nominal[b] : constant_like<T>(s.nominal[b], zero);
                    if (s.shape_first) term *= theta[*s.shape_first + b];
                    nu[b] += term;
                }
            }
            rates.push_back(std::move(nu));
        }
        return rates;
    }

private:
    struct CompiledSample {
        std::vector<double> nominal;
        std::vector<std::size_t> norm_params;
        std::optional<std::size_t> shape_first;
    };
    struct CompiledChannel {
        std::size_t n_bins = 0;
        std::vector<CompiledSample> samples;
    };

    ModelSpec spec_;
    std::vector<Bounds> bounds_;
    std::vector<CompiledChannel> channels_;
};

/// Coordinates of `model` with initial values taken from `priors`: free
/// parameters start at 1.0, constrained ones at their prior mean. Values not
/// strictly inside the bounds are moved inside.
inline ParameterSpace make_parameter_space(const Model& model, const PriorSet& priors) {
    if (!priors.covers(model.parameter_names())) throw MissingPriorError("prior set does not match the model parameters");
    ParameterSpace ps;
    const auto& params = model.spec().parameters;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Bounds b = model.bounds()[i];
        double x = params[i].kind == ParameterKind::Free ? kFreeInit : mean(priors[i]);
        if (!(x > b.lo && x < b.hi)) {
            const double width = std::isfinite(b.hi) ? (b.hi - b.lo) : std::numeric_limits<double>::infinity();
            const double step = std::min(standard_deviation(priors[i]), 0.5 * width);
            x = x <= b.lo ? b.lo + step : b.hi - step;
        }
        ps.names.push_back(params[i].name);
        ps.kinds.push_back(params[i].kind);
        ps.bounds.push_back(b);
        ps.init.push_back(x);
    }
    return ps;
}

inline std::vector<std::vector<double>> expected_rates(const Model& model, std::span<const double> theta) {
    return model.expected_rates<double>(theta);
}

namespace detail {

template <typename T>
T poisson_log_likelihood(const std::vector<std::vector<T>>& rates, const Counts& n) {
    using std::log;
    T total{};
    bool first = true;
    for (std::size_t c = 0; c < rates.size(); ++c) {
        if (n[c].size() != rates[c].size()) throw DimensionError("observed counts do not match channel bins");
        for (std::size_t b = 0; b < rates[c].size(); ++b) {
            const T& nu = rates[c][b];
            const double nu_v = value_of(nu);
            const auto count = n[c][b];
            if (nu_v < 0.0 || std::isnan(nu_v)) throw DomainError("negative expected rate (check parameter bounds)");
            T term = constant_like<T>(0.0, nu);
            if (count == 0) {
                term = -nu;  // 0 · ln 0 = 0
            } else if (nu_v == 0.0) {
                term = constant_like<T>(kNegInf, nu);
            } else {
                const double k = static_cast<double>(count);
                term = k * log(nu) - nu - log_factorial(k);
            }
            if (first) {
                total = std::move(term);
                first = false;
            } else {
                total += term;
            }
        }
    }
    return total;
}

template <typename T>
T log_posterior_impl(const Model& model, std::span<const T> theta, const PriorSet& priors, const Counts& n) {
    if (priors.size() != model.n_parameters()) throw MissingPriorError("prior set does not cover every parameter");
    if (n.size() != model.n_channels()) throw DimensionError("observations do not match the model channels");
    const T zero = theta.empty() ? T{} : constant_like<T>(0.0, theta[0]);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double v = value_of(theta[i]);
        if (!(v >= model.bounds()[i].lo && v <= model.bounds()[i].hi)) return constant_like<T>(kNegInf, zero);
    }
    T total = zero;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        T lp = log_density<T>(priors[i], theta[i]);
        if (value_of(lp) == kNegInf) return constant_like<T>(kNegInf, zero);
        total += lp;
    }
    const auto rates = model.expected_rates<T>(theta);
    if (!rates.empty()) total += poisson_log_likelihood<T>(rates, n);
    return total;
}

}  // namespace detail

/// Σ_cb [ n ln ν − ν − ln Γ(n+1) ] with 0·ln 0 = 0; −∞ when ν = 0 but n > 0.
inline double log_likelihood_main(const Model& model, std::span<const double> theta, const Counts& n) {
    if (n.size() != model.n_channels()) throw DimensionError("observations do not match the model channels");
    const auto rates = model.expected_rates<double>(theta);
    return rates.empty() ? 0.0 : detail::poisson_log_likelihood<double>(rates, n);
}

/// ln p(n | θ) + Σ ln p(θ_i); −∞ outside the bounds or the prior support.
inline double log_posterior_unnorm(const Model& model, std::span<const double> theta, const PriorSet& priors,
                                   const Counts& n) {
    if (theta.size() != model.n_parameters()) throw DimensionError("theta length does not match the model");
    return detail::log_posterior_impl<double>(model, theta, priors, n);
}

/// Value and exact gradient of log_posterior_unnorm via one forward-mode pass
/// with DualVector partials. Returns −∞ (and leaves `grad` unspecified)
/// outside the support.
inline double log_posterior_and_gradient(const Model& model, std::span<const double> theta, const PriorSet& priors,
                                         const Counts& n, std::span<double> grad) {
    const std::size_t dim = model.n_parameters();
    if (theta.size() != dim || grad.size() != dim) throw DimensionError("theta/gradient length does not match the model");
    std::vector<DualVector> x;
    x.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i) x.push_back(DualVector::variable(theta[i], i, dim));
    const DualVector lp = detail::log_posterior_impl<DualVector>(model, std::span<const DualVector>(x), priors, n);
    if (lp.value == kNegInf) return kNegInf;
    for (std::size_t i = 0; i < dim; ++i) grad[i] = lp.partials[i];
    return lp.value;
}

/// Gradient of log_posterior_unnorm. θ must lie strictly inside the support.
inline std::vector<double> grad_log_posterior(const Model& model, std::span<const double> theta, const PriorSet& priors,
                                              const Counts& n) {
    if (theta.size() != model.n_parameters()) throw DimensionError("theta length does not match the model");
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const Bounds b = model.bounds()[i];
        if (!(theta[i] > b.lo && theta[i] < b.hi))
            throw DomainError("gradient requested on or outside the boundary of '" + model.parameter_names()[i] + "'");
    }
    std::vector<double> grad(theta.size());
    const double lp = log_posterior_and_gradient(model, theta, priors, n, grad);
    if (lp == kNegInf) throw DomainError("gradient requested outside the posterior support");
    return grad;
}

/// Posterior density bound to one data set; the target the samplers run on.
class PosteriorTarget {
public:
    PosteriorTarget(const Model& model, PriorSet priors, Counts observed)
        : model_(&model), priors_(std::move(priors)), observed_(std::move(observed)),
          space_(make_parameter_space(model, priors_)) {}

    std::size_t dimension() const noexcept { return model_->n_parameters(); }
    const std::vector<std::string>& names() const noexcept { return model_->parameter_names(); }
    const std::vector<Bounds>& bounds() const noexcept { return model_->bounds(); }
    std::vector<double> initial_point() const { return space_.init; }
    const ParameterSpace& space() const noexcept { return space_; }
    const PriorSet& priors() const noexcept { return priors_; }
    const Counts& observed() const noexcept { return observed_; }

    double log_density(std::span<const double> theta) const {
        return log_posterior_unnorm(*model_, theta, priors_, observed_);
    }

    double log_density_and_gradient(std::span<const double> theta, std::span<double> grad) const {
        return log_posterior_and_gradient(*model_, theta, priors_, observed_, grad);
    }

private:
    const Model* model_;
    PriorSet priors_;
    Counts observed_;
    ParameterSpace space_;
};

}  // namespace histbayes
