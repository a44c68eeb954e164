#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "histbayes/histbayes.hpp"

namespace histbayes::cli {

namespace fs = std::filesystem;

/// Bad command line or config file (exit code 1).
class ConfigError : public Error {
public:
    using Error::Error;
};

struct CalibrationBudget {
    std::size_t n_pseudo = 300;
    std::size_t draws = 500;
    std::size_t warmup = 500;
    std::size_t posterior_draws = kDefaultPosteriorDraws;
};

struct RunConfig {
    fs::path workspace_path;
    nlohmann::json priors = nlohmann::json::object();  // ur-priors
    std::optional<fs::path> resolved_priors_path;      // explicit PriorSet, skips the conjugate update
    SamplerConfig sampler;
    bool seed_given = false;
    double thin_band = kDefaultThinBand;
    std::size_t predictive_draws = 1000;
    CalibrationBudget calibration;
    fs::path output_dir = ".";
};

/// Flag values; unset flags leave the config file's values alone.
struct Overrides {
    std::optional<std::string> workspace;
    std::optional<std::string> priors_file;
    std::optional<std::string> sampler;
    std::optional<std::size_t> draws;
    std::optional<std::size_t> warmup;
    std::optional<std::size_t> chains;
    std::optional<std::uint64_t> seed;
    std::optional<double> step_size;
    std::optional<std::size_t> leapfrog_steps;
    std::optional<std::string> proposal_scale;
    std::optional<double> thin_band;
    std::optional<std::size_t> n_pseudo;
    std::optional<std::string> out;
};

inline nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

inline SamplerKind parse_sampler_kind(const std::string& s) {
    if (s == "hmc") return SamplerKind::HMC;
    if (s == "mh") return SamplerKind::MH;
    throw ConfigError("sampler must be 'hmc' or 'mh', got '" + s + "'");
}

inline std::vector<double> parse_scale_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--proposal-scale expects numbers, got '" + s + "'");
        }
    }
    return out;
}

namespace detail {

template <typename T>
T get_field(const nlohmann::json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

inline void check_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ConfigError("unknown config key " + where + "." + it.key());
    }
}

}  // namespace detail

/// Loads the JSON config (paths inside it are relative to the file) and
/// applies flag overrides. Seed precedence: --seed, config, HISTBAYES_SEED, 0.
inline RunConfig load_config(const std::optional<std::string>& config_path, const Overrides& o) {
    using detail::get_field;
    RunConfig cfg;
    if (config_path) {
        const fs::path path(*config_path);
        const auto j = read_json_file(path);
        const fs::path base = path.parent_path();
        detail::check_keys(j, "$", {"workspace", "priors", "resolved_priors", "sampler", "thin_band", "predict",
                                    "calibration", "output_dir"});
        if (j.contains("workspace")) cfg.workspace_path = base / get_field<std::string>(j, "workspace", "$");
        if (j.contains("priors")) cfg.priors = j["priors"];
        if (j.contains("resolved_priors"))
            cfg.resolved_priors_path = base / get_field<std::string>(j, "resolved_priors", "$");
        if (j.contains("output_dir")) cfg.output_dir = base / get_field<std::string>(j, "output_dir", "$");
        if (j.contains("thin_band")) cfg.thin_band = get_field<double>(j, "thin_band", "$");
        if (j.contains("sampler")) {
            const auto& s = j["sampler"];
            detail::check_keys(s, "$.sampler",
                               {"kind", "draws", "warmup", "chains", "seed", "step_size", "leapfrog_steps", "proposal_scale"});
            if (s.contains("kind")) cfg.sampler.kind = parse_sampler_kind(get_field<std::string>(s, "kind", "$.sampler"));
            if (s.contains("draws")) cfg.sampler.n_draws = get_field<std::size_t>(s, "draws", "$.sampler");
            if (s.contains("warmup")) cfg.sampler.n_warmup = get_field<std::size_t>(s, "warmup", "$.sampler");
            if (s.contains("chains")) cfg.sampler.n_chains = get_field<std::size_t>(s, "chains", "$.sampler");
            if (s.contains("seed")) {
                cfg.sampler.seed = get_field<std::uint64_t>(s, "seed", "$.sampler");
                cfg.seed_given = true;
            }
            if (s.contains("step_size")) cfg.sampler.step_size = get_field<double>(s, "step_size", "$.sampler");
            if (s.contains("leapfrog_steps"))
                cfg.sampler.n_leapfrog = get_field<std::size_t>(s, "leapfrog_steps", "$.sampler");
            if (s.contains("proposal_scale")) {
                const auto& ps = s["proposal_scale"];
                if (ps.is_number()) cfg.sampler.proposal_scale = {ps.get<double>()};
                else cfg.sampler.proposal_scale = get_field<std::vector<double>>(s, "proposal_scale", "$.sampler");
            }
        }
        if (j.contains("predict")) {
            detail::check_keys(j["predict"], "$.predict", {"draws"});
            if (j["predict"].contains("draws")) cfg.predictive_draws = get_field<std::size_t>(j["predict"], "draws", "$.predict");
        }
        if (j.contains("calibration")) {
            const auto& c = j["calibration"];
            detail::check_keys(c, "$.calibration", {"n_pseudo", "draws", "warmup", "posterior_draws"});
            if (c.contains("n_pseudo")) cfg.calibration.n_pseudo = get_field<std::size_t>(c, "n_pseudo", "$.calibration");
            if (c.contains("draws")) cfg.calibration.draws = get_field<std::size_t>(c, "draws", "$.calibration");
            if (c.contains("warmup")) cfg.calibration.warmup = get_field<std::size_t>(c, "warmup", "$.calibration");
            if (c.contains("posterior_draws"))
                cfg.calibration.posterior_draws = get_field<std::size_t>(c, "posterior_draws", "$.calibration");
        }
    }

    if (o.workspace) cfg.workspace_path = *o.workspace;
    if (o.priors_file) cfg.resolved_priors_path = *o.priors_file;
    if (o.sampler) cfg.sampler.kind = parse_sampler_kind(*o.sampler);
    if (o.draws) {
        cfg.sampler.n_draws = *o.draws;
        cfg.predictive_draws = *o.draws;
        cfg.calibration.draws = *o.draws;
    }
    if (o.warmup) {
        cfg.sampler.n_warmup = *o.warmup;
        cfg.calibration.warmup = *o.warmup;
    }
    if (o.chains) cfg.sampler.n_chains = *o.chains;
    if (o.step_size) cfg.sampler.step_size = *o.step_size;
    if (o.leapfrog_steps) cfg.sampler.n_leapfrog = *o.leapfrog_steps;
    if (o.proposal_scale) cfg.sampler.proposal_scale = parse_scale_list(*o.proposal_scale);
    if (o.thin_band) cfg.thin_band = *o.thin_band;
    if (o.n_pseudo) cfg.calibration.n_pseudo = *o.n_pseudo;
    if (o.out) cfg.output_dir = *o.out;

    if (o.seed) {
        cfg.sampler.seed = *o.seed;
        cfg.seed_given = true;
    } else if (!cfg.seed_given) {
        if (const char* env = std::getenv("HISTBAYES_SEED"); env != nullptr && *env != '\0') {
            try {
                std::size_t used = 0;
                cfg.sampler.seed = std::stoull(env, &used);
                if (env[used] != '\0') throw std::invalid_argument(env);
            } catch (const std::exception&) {
                throw ConfigError(std::string("HISTBAYES_SEED is not an unsigned integer: '") + env + "'");
            }
            cfg.seed_given = true;
        }
    }

    if (!(cfg.thin_band > 0.0 && cfg.thin_band < 1.0)) throw ConfigError("thin_band must lie in (0, 1)");
    try {
        cfg.sampler.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid sampler settings: ") + e.what());
    }
    return cfg;
}

}  // namespace histbayes::cli
