#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "histbayes/distributions.hpp"
#include "histbayes/error.hpp"
#include "histbayes/workspace.hpp"

namespace histbayes {

/// Prior belief about one parameter before any auxiliary measurement.
struct UrPrior {
    std::string parameter;
    Distribution family;
};

/// Vague ur-prior defaults for constrained parameters without a user ur-prior.
inline constexpr double kVagueNormalScale = 1e3;  // sigma_ur = kVagueNormalScale * sigma_aux
inline constexpr double kVagueGammaShape = 1e-6;
inline constexpr double kVagueGammaRate = 1e-6;

/// Per-parameter priors aligned with a model's parameter order.
class PriorSet {
public:
    PriorSet() = default;

    void add(std::string name, Distribution d) {
        check_proper(d);
        if (index_.contains(name)) throw DomainError("duplicate prior for '" + name + "'");
        index_.emplace(name, names_.size());
        names_.push_back(std::move(name));
        dists_.push_back(d);
    }

    std::size_t size() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::vector<Distribution>& distributions() const noexcept { return dists_; }
    const Distribution& operator[](std::size_t i) const { return dists_.at(i); }

    bool contains(const std::string& name) const { return index_.contains(name); }
    const Distribution& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw MissingPriorError("no prior for parameter '" + name + "'");
        return dists_[it->second];
    }

    /// True iff this set holds exactly `order`, in that order.
    bool covers(const std::vector<std::string>& order) const { return names_ == order; }

    /// A copy reordered to `order`; throws MissingPriorError if a name is absent.
    PriorSet reordered(const std::vector<std::string>& order) const {
        if (order.size() != names_.size())
            throw MissingPriorError("prior set has " + std::to_string(names_.size()) + " entries, model has " +
                                    std::to_string(order.size()) + " parameters");
        PriorSet out;
        for (const auto& name : order) out.add(name, at(name));
        return out;
    }

    friend bool operator==(const PriorSet& a, const PriorSet& b) {
        return a.names_ == b.names_ && a.dists_ == b.dists_;
    }

private:
    std::vector<std::string> names_;
    std::vector<Distribution> dists_;
    std::map<std::string, std::size_t> index_;
};

struct GaussianPosterior {
    double mu = 0.0;
    double sigma = 0.0;  // standard deviation
};

/// Normal ur-prior updated with one Gaussian auxiliary measurement `a` of
/// resolution `sigma_aux`. The closed form gives the posterior variance
/// v = sa² su² / (sa² + su²) and mean v (mu_ur / su² + a / sa²); the returned
/// scale is sqrt(v).
inline GaussianPosterior gaussian_conjugate_update(double mu_ur, double sigma_ur, double a, double sigma_aux) {
    if (!(sigma_ur > 0.0) || !(sigma_aux > 0.0) || !std::isfinite(sigma_ur) || !std::isfinite(sigma_aux))
        throw DomainError("gaussian conjugate update needs positive, finite scales");
    if (!std::isfinite(mu_ur) || !std::isfinite(a)) throw DomainError("gaussian conjugate update needs finite means");
    const double var_aux = sigma_aux * sigma_aux;
    const double var_ur = sigma_ur * sigma_ur;
    // 1/v = 1/var_aux + 1/var_ur; this form avoids overflow for very vague ur-priors
    const double precision = 1.0 / var_aux + 1.0 / var_ur;
    const double variance = 1.0 / precision;
    return {variance * (mu_ur / var_ur + a / var_aux), std::sqrt(variance)};
}

struct GammaPosterior {
    double alpha = 0.0;
    double beta = 0.0;
};

/// Gamma ur-prior updated with one Poisson auxiliary count `a`.
inline GammaPosterior gamma_conjugate_update(double alpha_ur, double beta_ur, std::int64_t a) {
    if (a < 0) throw DomainError("auxiliary count must be non-negative");
    if (!(alpha_ur >= 0.0) || !(beta_ur >= 0.0) || !std::isfinite(alpha_ur) || !std::isfinite(beta_ur))
        throw DomainError("gamma ur-prior needs finite alpha_ur >= 0 and beta_ur >= 0");
    const double alpha = alpha_ur + static_cast<double>(a);
    if (!(alpha > 0.0)) throw DomainError("posterior shape is zero: improper gamma posterior");
    return {alpha, beta_ur + 1.0};
}

/// Moves a Gamma posterior over the rate χ onto the multiplicative factor
/// γ = χ / a: Gamma(alpha, beta) over χ becomes Gamma(alpha, a * beta) over γ.
inline Gamma gamma_rescale_to_factor(double alpha, double beta, std::int64_t a) {
    if (a <= 0) throw DomainError("rescaling to gamma = chi / a is undefined for auxiliary count a = " + std::to_string(a));
    return Gamma{alpha, static_cast<double>(a) * beta};
}

namespace detail {

inline const UrPrior* find_ur(const std::vector<UrPrior>& ur, const std::string& name) {
    for (const auto& u : ur)
        if (u.parameter == name) return &u;
    return nullptr;
}

}  // namespace detail

/// Builds the prior used by the main inference: free parameters keep their
/// ur-prior, constrained parameters get the closed-form conjugate update
/// against their auxiliary measurement.
///
/// Ur-priors for Poisson-constrained parameters may be given per bin
/// (`name[b]`) or once for the whole modifier (`name`).
inline PriorSet build_priors(const ModelSpec& spec, const std::vector<UrPrior>& ur, const ObservationSet& obs) {
    for (const auto& u : ur) {
        bool known = false;
        for (const auto& p : spec.parameters) known = known || p.name == u.parameter || p.modifier == u.parameter;
        if (!known) throw MissingPriorError("ur-prior given for unknown parameter '" + u.parameter + "'");
    }

    PriorSet priors;
    for (const auto& p : spec.parameters) {
        switch (p.kind) {
            case ParameterKind::Free: {
                const auto* u = detail::find_ur(ur, p.name);
                if (u == nullptr) throw MissingPriorError("free parameter '" + p.name + "' has no ur-prior");
                priors.add(p.name, u->family);
                break;
            }
            case ParameterKind::GaussConstrained: {
                auto it = obs.aux.find(p.modifier);
                if (it == obs.aux.end() || !std::holds_alternative<GaussAux>(it->second))
                    throw ValidationError("$.aux." + p.modifier, "missing aux data for constrained parameter '" + p.name + "'");
                const auto& aux = std::get<GaussAux>(it->second);
                Normal ur_normal{0.0, kVagueNormalScale * aux.sigma};
                if (const auto* u = detail::find_ur(ur, p.name)) {
                    const auto* n = std::get_if<Normal>(&u->family);
                    if (n == nullptr)
                        throw DomainError("ur-prior for gaussian-constrained '" + p.name + "' must be normal");
                    ur_normal = *n;
                }
                const auto post = gaussian_conjugate_update(ur_normal.mu, ur_normal.sigma, aux.a, aux.sigma);
                priors.add(p.name, Normal{post.mu, post.sigma});
                break;
            }
            case ParameterKind::PoissonConstrained: {
                auto it = obs.aux.find(p.modifier);
                if (it == obs.aux.end() || !std::holds_alternative<PoissonAux>(it->second))
                    throw ValidationError("$.aux." + p.modifier, "missing aux data for constrained parameter '" + p.name + "'");
                const auto& counts = std::get<PoissonAux>(it->second).a;
                if (p.bin >= counts.size())
                    throw ValidationError("$.aux." + p.modifier + ".a", "no aux count for bin " + std::to_string(p.bin));
                Gamma ur_gamma{kVagueGammaShape, kVagueGammaRate};
                const auto* u = detail::find_ur(ur, p.name);
                if (u == nullptr) u = detail::find_ur(ur, p.modifier);
                if (u != nullptr) {
                    const auto* g = std::get_if<Gamma>(&u->family);
                    if (g == nullptr)
                        throw DomainError("ur-prior for poisson-constrained '" + p.name + "' must be gamma");
                    ur_gamma = *g;
                }
                const std::int64_t a = counts[p.bin];
                const auto post = gamma_conjugate_update(ur_gamma.alpha, ur_gamma.beta, a);
                priors.add(p.name, gamma_rescale_to_factor(post.alpha, post.beta, a));
                break;
            }
        }
    }
    return priors;
}

/// {"name": {"normal": [mu, sigma]}, ...} in the set's order.
inline nlohmann::json to_json(const PriorSet& priors) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < priors.size(); ++i) j[priors.names()[i]] = to_json(priors[i]);
    return j;
}

/// Reads ur-priors from a {"name": {family: [a, b]}} block.
inline std::vector<UrPrior> ur_priors_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw SchemaError("$.priors", "expected an object");
    std::vector<UrPrior> out;
    for (auto it = j.begin(); it != j.end(); ++it)
        out.push_back({it.key(), distribution_from_json(it.value(), "$.priors." + it.key())});
    return out;
}

/// Reads an explicit prior set and orders it like `order`.
inline PriorSet prior_set_from_json(const nlohmann::json& j, const std::vector<std::string>& order) {
    if (!j.is_object()) throw SchemaError("$.priors", "expected an object");
    PriorSet unordered;
    for (auto it = j.begin(); it != j.end(); ++it)
        unordered.add(it.key(), distribution_from_json(it.value(), "$.priors." + it.key()));
    return unordered.reordered(order);
}

}  // namespace histbayes
