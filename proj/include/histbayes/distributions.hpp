#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <variant>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <nlohmann/json.hpp>

#include "histbayes/dual.hpp"
#include "histbayes/error.hpp"
#include "histbayes/rng.hpp"
#include "histbayes/special.hpp"

namespace histbayes {

struct Normal {
    double mu = 0.0;
    double sigma = 1.0;
    friend bool operator==(const Normal&, const Normal&) = default;
};

/// Shape/rate parameterization: density ∝ x^(alpha-1) exp(-beta x).
struct Gamma {
    double alpha = 1.0;
    double beta = 1.0;
    friend bool operator==(const Gamma&, const Gamma&) = default;
};

struct Uniform {
    double lo = 0.0;
    double hi = 1.0;
    friend bool operator==(const Uniform&, const Uniform&) = default;
};

using Distribution = std::variant<Normal, Gamma, Uniform>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Throws DomainError unless every hyperparameter is finite and in range.
inline void check_proper(const Distribution& d) {
    std::visit(
        [](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, Normal>) {
                if (!std::isfinite(p.mu) || !std::isfinite(p.sigma) || !(p.sigma > 0.0))
                    throw DomainError("normal prior needs finite mu and sigma > 0");
            } else if constexpr (std::is_same_v<P, Gamma>) {
                if (!std::isfinite(p.alpha) || !std::isfinite(p.beta) || !(p.alpha > 0.0) || !(p.beta > 0.0))
                    throw DomainError("gamma prior needs finite alpha > 0 and beta > 0");
            } else {
                if (!std::isfinite(p.lo) || !std::isfinite(p.hi) || !(p.lo < p.hi))
                    throw DomainError("uniform prior needs finite lo < hi");
            }
        },
        d);
}

/// Log density at x, -inf outside the support. Generic over double and DualVector.
template <typename T>
T log_density(const Distribution& d, const T& x) {
    using std::log;
    const double xv = value_of(x);
    return std::visit(
        [&](const auto& p) -> T {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, Normal>) {
                const T z = (x - p.mu) / p.sigma;
                return -0.5 * (z * z) - std::log(p.sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
            } else if constexpr (std::is_same_v<P, Gamma>) {
                if (!(xv > 0.0)) return constant_like<T>(kNegInf, x);
                return p.alpha * std::log(p.beta) - log_gamma(p.alpha) + (p.alpha - 1.0) * log(x) - p.beta * x;
            } else {
                if (xv < p.lo || xv > p.hi) return constant_like<T>(kNegInf, x);
                return constant_like<T>(-std::log(p.hi - p.lo), x);
            }
        },
        d);
}

inline double mean(const Distribution& d) {
    return std::visit(
        [](const auto& p) -> double {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, Normal>) return p.mu;
            else if constexpr (std::is_same_v<P, Gamma>) return p.alpha / p.beta;
            else return 0.5 * (p.lo + p.hi);
        },
        d);
}

inline double standard_deviation(const Distribution& d) {
    return std::visit(
        [](const auto& p) -> double {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, Normal>) return p.sigma;
            else if constexpr (std::is_same_v<P, Gamma>) return std::sqrt(p.alpha) / p.beta;
            else return (p.hi - p.lo) / std::sqrt(12.0);
        },
        d);
}

inline double cdf(const Distribution& d, double x) {
    return std::visit(
        [x](const auto& p) -> double {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, Normal>) {
                if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
                return boost::math::cdf(boost::math::normal_distribution<double>(p.mu, p.sigma), x);
            } else if constexpr (std::is_same_v<P, Gamma>) {
                if (x <= 0.0) return 0.0;
                if (std::isinf(x)) return 1.0;
                return boost::math::cdf(boost::math::gamma_distribution<double>(p.alpha, 1.0 / p.beta), x);
            } else {
                if (x <= p.lo) return 0.0;
                if (x >= p.hi) return 1.0;
                return (x - p.lo) / (p.hi - p.lo);
            }
        },
        d);
}

inline double quantile(const Distribution& d, double u) {
    return std::visit(
        [u](const auto& p) -> double {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, Normal>)
                return boost::math::quantile(boost::math::normal_distribution<double>(p.mu, p.sigma), u);
            else if constexpr (std::is_same_v<P, Gamma>)
                return boost::math::quantile(boost::math::gamma_distribution<double>(p.alpha, 1.0 / p.beta), u);
            else
                return p.lo + u * (p.hi - p.lo);
        },
        d);
}

inline double sample(const Distribution& d, Rng& rng) {
    return std::visit(
        [&rng](const auto& p) -> double {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, Normal>) return p.mu + p.sigma * standard_normal(rng);
            else if constexpr (std::is_same_v<P, Gamma>) return gamma_variate(rng, p.alpha, p.beta);
            else return p.lo + (p.hi - p.lo) * uniform01(rng);
        },
        d);
}

/// Draw from `d` restricted to [lo, hi]. Untruncated draws use the direct
/// sampler; truncated ones use inverse-CDF sampling on [F(lo), F(hi)].
inline double sample_truncated(const Distribution& d, double lo, double hi, Rng& rng) {
    const double flo = cdf(d, lo);
    const double fhi = cdf(d, hi);
    if (flo == 0.0 && fhi == 1.0) return sample(d, rng);
    if (!(fhi > flo)) throw ImproperPriorError("prior has no mass inside the parameter bounds");
    for (;;) {
        const double x = quantile(d, flo + (fhi - flo) * uniform01(rng));
        if (x >= lo && x <= hi) return x;
    }
}

inline nlohmann::json to_json(const Distribution& d) {
    return std::visit(
        [](const auto& p) -> nlohmann::json {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, Normal>) return {{"normal", {p.mu, p.sigma}}};
            else if constexpr (std::is_same_v<P, Gamma>) return {{"gamma", {p.alpha, p.beta}}};
            else return {{"uniform", {p.lo, p.hi}}};
        },
        d);
}

/// Reads {"normal": [mu, sigma]}, {"gamma": [alpha, beta]} or {"uniform": [lo, hi]}.
inline Distribution distribution_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object() || j.size() != 1)
        throw SchemaError(where, "expected one of {normal|gamma|uniform: [a, b]}");
    const std::string family = j.begin().key();
    const auto& args = j.begin().value();
    if (!args.is_array() || args.size() != 2 || !args[0].is_number() || !args[1].is_number())
        throw SchemaError(where + "." + family, "expected two numbers");
    const double a = args[0].get<double>();
    const double b = args[1].get<double>();
    if (family == "normal") return Normal{a, b};
    if (family == "gamma") return Gamma{a, b};
    if (family == "uniform") return Uniform{a, b};
    throw SchemaError(where, "unknown distribution family '" + family + "'");
}

}  // namespace histbayes
