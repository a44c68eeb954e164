#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "histbayes/error.hpp"

namespace histbayes {

using json = nlohmann::json;

enum class ModifierKind { FreeNorm, GaussConstrainedNorm, PoissonConstrainedShape };

enum class ParameterKind { Free, GaussConstrained, PoissonConstrained };

struct Modifier {
    ModifierKind kind = ModifierKind::FreeNorm;
    std::string parameter;

    friend bool operator==(const Modifier&, const Modifier&) = default;
};

struct Sample {
    std::string name;
    std::vector<double> nominal;
    std::vector<Modifier> modifiers;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct Channel {
    std::string name;
    std::vector<Sample> samples;
    std::size_t n_bins = 0;

    friend bool operator==(const Channel&, const Channel&) = default;
};

/// One scalar model coordinate. A PoissonConstrainedShape modifier expands
/// into one parameter per bin named `<modifier>[<bin>]`.
struct ParameterInfo {
    std::string name;
    ParameterKind kind = ParameterKind::Free;
    std::string modifier;
    std::size_t bin = 0;

    friend bool operator==(const ParameterInfo&, const ParameterInfo&) = default;
};

struct ModelSpec {
    std::vector<Channel> channels;
    /// Free parameters in declaration order, then constrained ones.
    std::vector<std::string> parameter_order;
    /// Parallel to parameter_order.
    std::vector<ParameterInfo> parameters;

    std::size_t n_parameters() const noexcept { return parameter_order.size(); }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct GaussAux {
    double a = 0.0;
    double sigma = 1.0;

    friend bool operator==(const GaussAux&, const GaussAux&) = default;
};

struct PoissonAux {
    std::vector<std::int64_t> a;

    friend bool operator==(const PoissonAux&, const PoissonAux&) = default;
};

using AuxData = std::variant<GaussAux, PoissonAux>;

/// Observed main-measurement counts per channel (aligned with
/// ModelSpec::channels) and auxiliary measurements keyed by modifier name.
using Counts = std::vector<std::vector<std::int64_t>>;

struct ObservationSet {
    Counts main;
    std::map<std::string, AuxData> aux;

    friend bool operator==(const ObservationSet&, const ObservationSet&) = default;
};

enum class Severity { Warning, Error };

struct ValidationFinding {
    Severity severity = Severity::Error;
    std::string path;
    std::string message;
};

inline std::string_view to_string(ModifierKind kind) {
    switch (kind) {
        case ModifierKind::FreeNorm: return "normfactor";
        case ModifierKind::GaussConstrainedNorm: return "normsys_gauss";
        case ModifierKind::PoissonConstrainedShape: return "shapesys_poisson";
    }
    return "?";
}

inline std::string_view to_string(ParameterKind kind) {
    switch (kind) {
        case ParameterKind::Free: return "free";
        case ParameterKind::GaussConstrained: return "gauss_constrained";
        case ParameterKind::PoissonConstrained: return "poisson_constrained";
    }
    return "?";
}

inline ParameterKind parameter_kind_of(ModifierKind kind) {
    switch (kind) {
        case ModifierKind::FreeNorm: return ParameterKind::Free;
        case ModifierKind::GaussConstrainedNorm: return ParameterKind::GaussConstrained;
        case ModifierKind::PoissonConstrainedShape: return ParameterKind::PoissonConstrained;
    }
    return ParameterKind::Free;
}

inline std::string shape_parameter_name(const std::string& modifier, std::size_t bin) {
    return modifier + "[" + std::to_string(bin) + "]";
}

/// Derives the ordered parameter list from the channels' modifiers.
inline std::vector<ParameterInfo> derive_parameters(const std::vector<Channel>& channels) {
    std::vector<ParameterInfo> free_params;
    std::vector<ParameterInfo> constrained;
    std::set<std::string> seen;
    for (const auto& channel : channels) {
        for (const auto& sample : channel.samples) {
            for (const auto& mod : sample.modifiers) {
                if (!seen.insert(mod.parameter).second) continue;
                switch (mod.kind) {
                    case ModifierKind::FreeNorm:
                        free_params.push_back({mod.parameter, ParameterKind::Free, mod.parameter, 0});
                        break;
                    case ModifierKind::GaussConstrainedNorm:
                        constrained.push_back(
                            {mod.parameter, ParameterKind::GaussConstrained, mod.parameter, 0});
                        break;
                    case ModifierKind::PoissonConstrainedShape:
                        for (std::size_t b = 0; b < sample.nominal.size(); ++b)
                            constrained.push_back({shape_parameter_name(mod.parameter, b),
                                                   ParameterKind::PoissonConstrained, mod.parameter, b});
                        break;
                }
            }
        }
    }
    free_params.insert(free_params.end(), constrained.begin(), constrained.end());
    return free_params;
}

/// Builds a ModelSpec from channels, filling in n_bins and the parameter list.
inline ModelSpec make_model_spec(std::vector<Channel> channels) {
    for (auto& ch : channels)
        if (ch.n_bins == 0 && !ch.samples.empty()) ch.n_bins = ch.samples.front().nominal.size();
    ModelSpec spec;
    spec.parameters = derive_parameters(channels);
    spec.channels = std::move(channels);
    for (const auto& p : spec.parameters) spec.parameter_order.push_back(p.name);
    return spec;
}

namespace detail {

inline std::string channel_path(std::size_t c) { return "$.channels[" + std::to_string(c) + "]"; }

inline std::string sample_path(std::size_t c, std::size_t s) {
    return channel_path(c) + ".samples[" + std::to_string(s) + "]";
}

}  // namespace detail

/// Checks every structural invariant of a model/observation pair. Returns an
/// empty list iff the pair is valid.
inline std::vector<ValidationFinding> validate(const ModelSpec& spec, const ObservationSet& obs) {
    std::vector<ValidationFinding> out;
    auto error = [&](std::string path, std::string message) {
        out.push_back({Severity::Error, std::move(path), std::move(message)});
    };

    std::set<std::string> channel_names;
    std::map<std::string, ModifierKind> kind_of;
    std::map<std::string, std::size_t> shape_uses;
    std::map<std::string, std::size_t> shape_bins;

    for (std::size_t c = 0; c < spec.channels.size(); ++c) {
        const auto& ch = spec.channels[c];
        const auto cpath = detail::channel_path(c);
        if (ch.name.empty()) error(cpath + ".name", "empty channel name");
        if (!channel_names.insert(ch.name).second)
            error(cpath + ".name", "duplicate channel name '" + ch.name + "'");
        if (ch.samples.empty()) error(cpath + ".samples", "channel '" + ch.name + "' has no samples");
        if (ch.n_bins == 0) error(cpath, "channel '" + ch.name + "' has no bins");

        std::set<std::string> sample_names;
        for (std::size_t s = 0; s < ch.samples.size(); ++s) {
            const auto& sample = ch.samples[s];
            const auto spath = detail::sample_path(c, s);
            if (!sample_names.insert(sample.name).second)
                error(spath + ".name", "duplicate sample name '" + sample.name + "' in channel '" +
                                           ch.name + "'");
            if (sample.nominal.size() != ch.n_bins)
                error(spath + ".data", "sample '" + sample.name + "' has " +
                                           std::to_string(sample.nominal.size()) + " bins, channel '" +
                                           ch.name + "' has " + std::to_string(ch.n_bins));
            for (std::size_t b = 0; b < sample.nominal.size(); ++b) {
                const double v = sample.nominal[b];
                const auto bpath = spath + ".data[" + std::to_string(b) + "]";
                if (!std::isfinite(v))
                    error(bpath, "non-finite nominal rate");
                else if (v < 0.0)
                    error(bpath, "negative nominal rate");
            }
            std::size_t n_shape = 0;
            for (std::size_t m = 0; m < sample.modifiers.size(); ++m) {
                const auto& mod = sample.modifiers[m];
                const auto mpath = spath + ".modifiers[" + std::to_string(m) + "]";
                if (mod.parameter.empty()) error(mpath + ".name", "empty modifier name");
                auto [it, inserted] = kind_of.emplace(mod.parameter, mod.kind);
                if (!inserted && it->second != mod.kind)
                    error(mpath + ".type", "modifier '" + mod.parameter + "' used with conflicting types");
                if (mod.kind == ModifierKind::PoissonConstrainedShape) {
                    ++n_shape;
                    ++shape_uses[mod.parameter];
                    shape_bins[mod.parameter] = ch.n_bins;
                }
            }
            if (n_shape > 1)
                error(spath + ".modifiers",
                      "sample '" + sample.name + "' has more than one shapesys_poisson modifier");
        }
    }
    for (const auto& [name, uses] : shape_uses)
        if (uses > 1) error("$.channels", "shapesys_poisson modifier '" + name + "' is used by more than one sample");

    // the parameter list must be exactly the one the modifiers imply
    const auto expected = derive_parameters(spec.channels);
    if (spec.parameters != expected || spec.parameter_order.size() != expected.size()) {
        error("$", "parameter list does not match the parameters referenced by modifiers");
    } else {
        for (std::size_t i = 0; i < expected.size(); ++i)
            if (spec.parameter_order[i] != expected[i].name)
                error("$", "parameter_order[" + std::to_string(i) + "] is '" + spec.parameter_order[i] +
                               "', expected '" + expected[i].name + "'");
    }

    // main observations
    if (obs.main.size() != spec.channels.size()) {
        error("$.observations", "observations cover " + std::to_string(obs.main.size()) + " channels, model has " +
                                    std::to_string(spec.channels.size()));
    } else {
        for (std::size_t c = 0; c < spec.channels.size(); ++c) {
            const auto& ch = spec.channels[c];
            const auto opath = "$.observations[" + std::to_string(c) + "]";
            if (obs.main[c].size() != ch.n_bins)
                error(opath + ".data", "observations for channel '" + ch.name + "' have " +
                                           std::to_string(obs.main[c].size()) + " entries, channel has " +
                                           std::to_string(ch.n_bins) + " bins");
            for (std::size_t b = 0; b < obs.main[c].size(); ++b)
                if (obs.main[c][b] < 0)
                    error(opath + ".data[" + std::to_string(b) + "]", "negative observed count");
        }
    }

    // auxiliary measurements
    for (const auto& [name, kind] : kind_of) {
        if (kind == ModifierKind::FreeNorm) {
            if (obs.aux.contains(name)) error("$.aux." + name, "free parameter '" + name + "' must not have aux data");
            continue;
        }
        const auto apath = "$.aux." + name;
        auto it = obs.aux.find(name);
        if (it == obs.aux.end()) {
            error(apath, "missing aux data for constrained parameter '" + name + "'");
            continue;
        }
        if (kind == ModifierKind::GaussConstrainedNorm) {
            const auto* g = std::get_if<GaussAux>(&it->second);
            if (g == nullptr) {
                error(apath, "normsys_gauss parameter '" + name + "' needs {a, sigma} aux data");
            } else {
                if (!std::isfinite(g->a)) error(apath + ".a", "non-finite aux observation");
                if (!(g->sigma > 0.0) || !std::isfinite(g->sigma))
                    error(apath + ".sigma", "aux sigma must be positive");
            }
        } else {
            const auto* p = std::get_if<PoissonAux>(&it->second);
            if (p == nullptr) {
                error(apath, "shapesys_poisson parameter '" + name + "' needs an {a: [...]} aux vector");
            } else {
                if (p->a.size() != shape_bins[name])
                    error(apath + ".a", "aux vector for '" + name + "' has " + std::to_string(p->a.size()) +
                                            " entries, sample has " + std::to_string(shape_bins[name]) + " bins");
                for (std::size_t b = 0; b < p->a.size(); ++b)
                    if (p->a[b] < 0) error(apath + ".a[" + std::to_string(b) + "]", "negative aux count");
            }
        }
    }
    for (const auto& [name, aux] : obs.aux)
        if (!kind_of.contains(name)) error("$.aux." + name, "aux data for unknown parameter '" + name + "'");

    return out;
}

namespace detail {

inline void require_object(const json& j, const std::string& path, const std::set<std::string>& required,
                           const std::set<std::string>& optional = {}) {
    if (!j.is_object()) throw SchemaError(path, "expected an object");
    for (const auto& key : required)
        if (!j.contains(key)) throw SchemaError(path, "missing field '" + key + "'");
    for (const auto& [key, value] : j.items())
        if (!required.contains(key) && !optional.contains(key))
            throw SchemaError(path + "." + key, "unexpected field '" + key + "'");
}

inline const std::string& require_string(const json& j, const std::string& path) {
    if (!j.is_string()) throw SchemaError(path, "expected a string");
    return j.get_ref<const std::string&>();
}

inline const json& require_array(const json& j, const std::string& path) {
    if (!j.is_array()) throw SchemaError(path, "expected an array");
    return j;
}

inline double require_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw SchemaError(path, "expected a number");
    return j.get<double>();
}

inline std::int64_t require_count(const json& j, const std::string& path) {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (!j.is_number()) throw SchemaError(path, "expected an integer count");
    const double v = j.get<double>();
    if (!std::isfinite(v) || v != std::floor(v) || std::abs(v) > 9.0e15)
        throw ValidationError(path, "count is not an integer");
    return static_cast<std::int64_t>(v);
}

inline std::vector<std::int64_t> require_counts(const json& j, const std::string& path) {
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < require_array(j, path).size(); ++i)
        out.push_back(require_count(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline ModifierKind parse_modifier_kind(const std::string& type, const std::string& path) {
    if (type == "normfactor") return ModifierKind::FreeNorm;
    if (type == "normsys_gauss") return ModifierKind::GaussConstrainedNorm;
    if (type == "shapesys_poisson") return ModifierKind::PoissonConstrainedShape;
    throw SchemaError(path, "unknown modifier type '" + type + "'");
}

}  // namespace detail

/// Parses a workspace document already decoded as JSON.
inline std::pair<ModelSpec, ObservationSet> parse_workspace(const json& doc) {
    using namespace detail;
    require_object(doc, "$", {"channels", "observations"}, {"aux"});

    std::vector<Channel> channels;
    const auto& jchannels = require_array(doc["channels"], "$.channels");
    for (std::size_t c = 0; c < jchannels.size(); ++c) {
        const auto cpath = channel_path(c);
        const auto& jc = jchannels[c];
        require_object(jc, cpath, {"name", "samples"});
        Channel ch;
        ch.name = require_string(jc["name"], cpath + ".name");
        const auto& jsamples = require_array(jc["samples"], cpath + ".samples");
        for (std::size_t s = 0; s < jsamples.size(); ++s) {
            const auto spath = sample_path(c, s);
            const auto& js = jsamples[s];
            require_object(js, spath, {"name", "data", "modifiers"});
            Sample sample;
            sample.name = require_string(js["name"], spath + ".name");
            const auto& jdata = require_array(js["data"], spath + ".data");
            for (std::size_t b = 0; b < jdata.size(); ++b)
                sample.nominal.push_back(require_number(jdata[b], spath + ".data[" + std::to_string(b) + "]"));
            const auto& jmods = require_array(js["modifiers"], spath + ".modifiers");
            for (std::size_t m = 0; m < jmods.size(); ++m) {
                const auto mpath = spath + ".modifiers[" + std::to_string(m) + "]";
                const auto& jm = jmods[m];
                require_object(jm, mpath, {"name", "type"}, {"data"});
                if (jm.contains("data") && !jm["data"].is_null())
                    throw SchemaError(mpath + ".data", "modifier data must be null; aux data lives in $.aux");
                sample.modifiers.push_back(
                    {parse_modifier_kind(require_string(jm["type"], mpath + ".type"), mpath + ".type"),
                     require_string(jm["name"], mpath + ".name")});
            }
            ch.samples.push_back(std::move(sample));
        }
        channels.push_back(std::move(ch));
    }
    ModelSpec spec = make_model_spec(std::move(channels));

    ObservationSet obs;
    std::map<std::string, std::vector<std::int64_t>> by_name;
    const auto& jobs = require_array(doc["observations"], "$.observations");
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto opath = "$.observations[" + std::to_string(i) + "]";
        require_object(jobs[i], opath, {"name", "data"});
        const auto& name = require_string(jobs[i]["name"], opath + ".name");
        auto counts = require_counts(jobs[i]["data"], opath + ".data");
        if (!by_name.emplace(name, std::move(counts)).second)
            throw ValidationError(opath + ".name", "duplicate observations for channel '" + name + "'");
    }
    for (const auto& ch : spec.channels) {
        auto it = by_name.find(ch.name);
        if (it == by_name.end()) throw ValidationError("$.observations", "no observations for channel '" + ch.name + "'");
        if (it->second.size() != ch.n_bins)
            throw ValidationError("$.observations", "observations for channel '" + ch.name + "' have " +
                                                        std::to_string(it->second.size()) + " entries, channel has " +
                                                        std::to_string(ch.n_bins) + " bins");
        obs.main.push_back(std::move(it->second));
        by_name.erase(it);
    }
    if (!by_name.empty())
        throw ValidationError("$.observations", "observations for unknown channel '" + by_name.begin()->first + "'");

    if (doc.contains("aux")) {
        const auto& jaux = doc["aux"];
        if (!jaux.is_object()) throw SchemaError("$.aux", "expected an object");
        for (const auto& [name, entry] : jaux.items()) {
            const auto apath = "$.aux." + name;
            if (!entry.is_object() || !entry.contains("a")) throw SchemaError(apath, "expected an object with field 'a'");
            if (entry["a"].is_array()) {
                require_object(entry, apath, {"a"});
                obs.aux.emplace(name, PoissonAux{require_counts(entry["a"], apath + ".a")});
            } else {
                require_object(entry, apath, {"a", "sigma"});
                obs.aux.emplace(name, GaussAux{require_number(entry["a"], apath + ".a"),
                                               require_number(entry["sigma"], apath + ".sigma")});
            }
        }
    }

    for (const auto& finding : validate(spec, obs))
        if (finding.severity == Severity::Error) throw ValidationError(finding.path, finding.message);
    return {std::move(spec), std::move(obs)};
}

/// Parses workspace text. Malformed JSON raises SyntaxError.
inline std::pair<ModelSpec, ObservationSet> parse_workspace(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SyntaxError(std::string("malformed JSON: ") + e.what());
    }
    return parse_workspace(doc);
}

inline std::pair<ModelSpec, ObservationSet> parse_workspace(const std::string& text) {
    return parse_workspace(std::string_view(text));
}

inline std::pair<ModelSpec, ObservationSet> parse_workspace(const char* text) {
    return parse_workspace(std::string_view(text));
}

/// Inverse of parse_workspace.
inline json serialize_workspace(const ModelSpec& spec, const ObservationSet& obs) {
    json doc;
    doc["channels"] = json::array();
    doc["observations"] = json::array();
    for (std::size_t c = 0; c < spec.channels.size(); ++c) {
        const auto& ch = spec.channels[c];
        json jc{{"name", ch.name}, {"samples", json::array()}};
        for (const auto& sample : ch.samples) {
            json js{{"name", sample.name}, {"data", sample.nominal}, {"modifiers", json::array()}};
            for (const auto& mod : sample.modifiers)
                js["modifiers"].push_back({{"name", mod.parameter}, {"type", to_string(mod.kind)}, {"data", nullptr}});
            jc["samples"].push_back(std::move(js));
        }
        doc["channels"].push_back(std::move(jc));
        doc["observations"].push_back({{"name", ch.name}, {"data", c < obs.main.size() ? obs.main[c] : std::vector<std::int64_t>{}}});
    }
    if (!obs.aux.empty()) {
        doc["aux"] = json::object();
        for (const auto& [name, aux] : obs.aux) {
            if (const auto* g = std::get_if<GaussAux>(&aux))
                doc["aux"][name] = {{"a", g->a}, {"sigma", g->sigma}};
            else
                doc["aux"][name] = {{"a", std::get<PoissonAux>(aux).a}};
        }
    }
    return doc;
}

}  // namespace histbayes
