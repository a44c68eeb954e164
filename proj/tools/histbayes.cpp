// histbayes: sample, diagnose, predict and calibrate HistFactory-style models.
//
// Exit codes: 0 ok, 1 config/usage/malformed input, 2 model validation,
// 3 sampling failure, 4 calibration failure.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "histbayes/histbayes.hpp"
#include "run_config.hpp"

namespace hb = histbayes;
namespace cli = histbayes::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit : int { kOk = 0, kConfig = 1, kValidation = 2, kSampling = 3, kCalibration = 4 };

/// Raw flag storage; every option pointer is kept so `count()` tells whether it was given.
struct Flags {
    std::string config, workspace, priors_file, sampler, proposal_scale, out;
    std::size_t draws = 0, warmup = 0, chains = 0, leapfrog_steps = 0, n_pseudo = 0;
    std::uint64_t seed = 0;
    double step_size = 0.0, thin_band = 0.0;
    std::vector<std::pair<std::string, CLI::Option*>> options;

    void add(CLI::App* app) {
        options.emplace_back("config", app->add_option("--config", config, "JSON run config"));
        options.emplace_back("workspace", app->add_option("--workspace", workspace, "workspace JSON file"));
        options.emplace_back("priors", app->add_option("--priors", priors_file, "resolved priors file from a previous run"));
        options.emplace_back("sampler", app->add_option("--sampler", sampler, "hmc or mh")->check(CLI::IsMember({"hmc", "mh"})));
        options.emplace_back("draws", app->add_option("--draws", draws, "draws per chain"));
        options.emplace_back("warmup", app->add_option("--warmup", warmup, "warmup iterations per chain"));
        options.emplace_back("chains", app->add_option("--chains", chains, "number of chains"));
        options.emplace_back("seed", app->add_option("--seed", seed, "master seed"));
        options.emplace_back("step-size", app->add_option("--step-size", step_size, "HMC leapfrog step size"));
        options.emplace_back("leapfrog-steps", app->add_option("--leapfrog-steps", leapfrog_steps, "HMC leapfrog steps"));
        options.emplace_back("proposal-scale",
                             app->add_option("--proposal-scale", proposal_scale, "MH proposal sd, one value or comma list"));
        options.emplace_back("thin-band", app->add_option("--thin-band", thin_band, "acceptable |acf| band"));
        options.emplace_back("n-pseudo", app->add_option("--n-pseudo", n_pseudo, "pseudo-experiments"));
        options.emplace_back("out", app->add_option("--out", out, "output directory"));
    }

    bool given(const std::string& name) const {
        for (const auto& [n, o] : options)
            if (n == name) return o->count() > 0;
        return false;
    }

    template <typename T>
    std::optional<T> opt(const std::string& name, const T& value) const {
        return given(name) ? std::optional<T>(value) : std::nullopt;
    }

    cli::RunConfig load() const {
        cli::Overrides o;
        o.workspace = opt("workspace", workspace);
        o.priors_file = opt("priors", priors_file);
        o.sampler = opt("sampler", sampler);
        o.draws = opt("draws", draws);
        o.warmup = opt("warmup", warmup);
        o.chains = opt("chains", chains);
        o.seed = opt("seed", seed);
        o.step_size = opt("step-size", step_size);
        o.leapfrog_steps = opt("leapfrog-steps", leapfrog_steps);
        o.proposal_scale = opt("proposal-scale", proposal_scale);
        o.thin_band = opt("thin-band", thin_band);
        o.n_pseudo = opt("n-pseudo", n_pseudo);
        o.out = opt("out", out);
        return cli::load_config(given("config") ? std::optional<std::string>(config) : std::nullopt, o);
    }
};

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw cli::ConfigError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw cli::ConfigError("failed writing '" + path.string() + "'");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct LoadedModel {
    hb::ModelSpec spec;
    hb::ObservationSet obs;
    json ur_priors = json::object();
    hb::PriorSet priors;
};

LoadedModel load_model(const cli::RunConfig& cfg) {
    if (cfg.workspace_path.empty()) throw cli::ConfigError("no workspace given (--workspace or config 'workspace')");
    std::ifstream in(cfg.workspace_path, std::ios::binary);
    if (!in) throw cli::ConfigError("cannot open workspace '" + cfg.workspace_path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    LoadedModel m;
    std::tie(m.spec, m.obs) = hb::parse_workspace(ss.str());

    if (cfg.resolved_priors_path) {
        const auto j = cli::read_json_file(*cfg.resolved_priors_path);
        if (!j.is_object() || !j.contains("priors"))
            throw hb::SchemaError("$", "resolved priors file needs a 'priors' object");
        m.priors = hb::prior_set_from_json(j["priors"], m.spec.parameter_order);
        if (j.contains("ur_priors")) m.ur_priors = j["ur_priors"];
    } else {
        m.ur_priors = cfg.priors;
        m.priors = hb::build_priors(m.spec, hb::ur_priors_from_json(cfg.priors), m.obs);
    }
    return m;
}

json resolved_priors_json(const LoadedModel& m) {
    json j;
    j["parameter_order"] = m.spec.parameter_order;
    j["priors"] = hb::to_json(m.priors);
    j["ur_priors"] = m.ur_priors;
    const auto ws = hb::serialize_workspace(m.spec, m.obs);
    j["aux"] = ws.contains("aux") ? ws["aux"] : json::object();
    return j;
}

json sampler_json(const hb::SamplerConfig& s) {
    json j{{"kind", std::string(hb::to_string(s.kind))},
           {"draws", s.n_draws},
           {"warmup", s.n_warmup},
           {"chains", s.n_chains},
           {"seed", s.seed}};
    if (s.kind == hb::SamplerKind::HMC) {
        j["step_size"] = s.step_size;
        j["leapfrog_steps"] = s.n_leapfrog;
    } else {
        j["proposal_scale"] = s.proposal_scale;
    }
    return j;
}

std::vector<hb::Chain> read_chains(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw cli::ConfigError("cannot open chains file '" + path + "'");
    return hb::read_chains_csv(in);
}

// ---------------------------------------------------------------------------

int cmd_sample(const cli::RunConfig& cfg) {
    const auto m = load_model(cfg);
    const hb::Model model(m.spec);
    const hb::PosteriorTarget target(model, m.priors, m.obs.main);
    const auto chains = hb::run_chains(target, cfg.sampler);

    std::ostringstream csv;
    hb::write_chains_csv(csv, chains);

    json meta;
    meta["sampler"] = sampler_json(cfg.sampler);
    meta["parameters"] = model.parameter_names();
    meta["chains"] = json::array();
    for (const auto& c : chains)
        meta["chains"].push_back({{"chain", c.stream},
                                  {"stream", c.stream},
                                  {"draws", c.n_draws},
                                  {"accepted", c.accepted},
                                  {"acceptance_rate", c.acceptance_rate},
                                  {"divergences", c.divergence_count}});

    write_file(cfg.output_dir / "chains.csv", csv.str());
    write_file(cfg.output_dir / "chains_meta.json", dump(meta));
    write_file(cfg.output_dir / "priors_resolved.json", dump(resolved_priors_json(m)));
    return kOk;
}

int cmd_diagnose(const cli::RunConfig& cfg, const std::string& chains_path) {
    const auto chains = read_chains(chains_path);
    for (const auto& c : chains)
        if (c.n_draws < 100)
            throw hb::InsufficientDataError("insufficient draws: chain " + std::to_string(c.stream) + " has " +
                                            std::to_string(c.n_draws) + ", at least 100 needed");
    std::size_t len = chains.front().n_draws;
    for (const auto& c : chains) len = std::min(len, c.n_draws);

    json out;
    out["thin_band"] = cfg.thin_band;
    out["chains"] = chains.size();
    out["draws_per_chain"] = len;
    out["parameters"] = json::array();
    std::ostringstream acf;
    acf << "parameter,lag,acf_raw,acf_thinned\n";
    std::size_t overall = 1;
    bool all_finite = true;
    for (std::size_t p = 0; p < chains.front().n_params(); ++p) {
        json pj;
        std::vector<double> raw, thinned;
        try {
            const auto d = hb::diagnose_parameter(chains, p, cfg.thin_band);
            pj = hb::to_json(d);
            raw = d.acf_raw;
            thinned = d.acf_thinned;
            overall = std::max(overall, d.required_thinning);
        } catch (const hb::NoFiniteThinningError& e) {
            all_finite = false;
            const auto& name = chains.front().param_names[p];
            const std::size_t max_lag = std::min(hb::kThinningMaxLag, len / 10);
            raw.assign(max_lag + 1, 0.0);
            double ess = 0.0;
            for (const auto& c : chains) {
                const auto col = c.column(p);
                const auto a = hb::autocorrelation(col, max_lag);
                for (std::size_t k = 0; k < a.size(); ++k) raw[k] += a[k] / static_cast<double>(chains.size());
                ess += hb::effective_sample_size(col);
            }
            pj = {{"parameter", name}, {"lags", max_lag}, {"acf", raw}, {"acf_thinned", json::array()},
                  {"ess", ess},        {"required_thinning", nullptr}, {"error", e.what()}};
            pj["rhat"] = chains.size() >= 2 ? json(hb::split_rhat(chains, p)) : json(nullptr);
        }
        out["parameters"].push_back(pj);
        const auto& name = chains.front().param_names[p];
        for (std::size_t k = 0; k < raw.size(); ++k) {
            acf << name << ',' << k << ',' << hb::format_double(raw[k]) << ',';
            if (k < thinned.size()) acf << hb::format_double(thinned[k]);
            acf << '\n';
        }
    }
    out["required_thinning"] = all_finite ? json(overall) : json(nullptr);

    write_file(cfg.output_dir / "diagnostics.json", dump(out));
    write_file(cfg.output_dir / "acf.csv", acf.str());
    return kOk;
}

int cmd_predict(const cli::RunConfig& cfg, const std::string& kind, const std::string& chains_path) {
    hb::PredictiveSamples samples;
    if (kind == "prior") {
        const auto m = load_model(cfg);
        const hb::Model model(m.spec);
        samples = hb::prior_predictive(model, m.priors, cfg.predictive_draws, cfg.sampler.seed);
    } else {
        if (chains_path.empty()) throw cli::ConfigError("posterior predictive needs a chains file");
        if (cfg.workspace_path.empty()) throw cli::ConfigError("no workspace given (--workspace or config 'workspace')");
        std::ifstream in(cfg.workspace_path, std::ios::binary);
        if (!in) throw cli::ConfigError("cannot open workspace '" + cfg.workspace_path.string() + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        const auto [spec, obs] = hb::parse_workspace(ss.str());
        const hb::Model model(spec);
        samples = hb::posterior_predictive(model, read_chains(chains_path), cfg.sampler.seed);
    }

    std::ostringstream csv;
    csv << "draw,channel,bin,count\n";
    for (std::size_t i = 0; i < samples.size(); ++i)
        for (std::size_t c = 0; c < samples.draws[i].size(); ++c)
            for (std::size_t b = 0; b < samples.draws[i][c].size(); ++b)
                csv << i << ',' << c << ',' << b << ',' << samples.draws[i][c][b] << '\n';

    json summary;
    summary["kind"] = std::string(hb::to_string(samples.kind));
    summary["draws"] = samples.size();
    summary["seed"] = samples.seed;
    summary["bins"] = json::array();
    for (const auto& s : hb::summarize(samples))
        summary["bins"].push_back({{"channel", s.channel},
                                   {"bin", s.bin},
                                   {"mean", s.mean},
                                   {"interval_68", {s.lo68, s.hi68}},
                                   {"interval_95", {s.lo95, s.hi95}},
                                   {"interval_99", {s.lo99, s.hi99}}});

    write_file(cfg.output_dir / "predictive.csv", csv.str());
    write_file(cfg.output_dir / "summary.json", dump(summary));
    return kOk;
}

/// Histogram of pooled posterior and prior reference draws on shared edges.
std::string overlay_histogram(const hb::CalibrationResult& r, std::size_t bins) {
    std::ostringstream os;
    os << "parameter,bin,lower,upper,posterior,prior\n";
    for (std::size_t p = 0; p < r.n_params(); ++p) {
        const auto post = r.column(r.aggregated_posterior_draws, p);
        const auto prior = r.column(r.prior_reference_draws, p);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto* v : {&post, &prior})
            for (double x : *v) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
        if (!(hi > lo)) hi = lo + 1.0;
        const double width = (hi - lo) / static_cast<double>(bins);
        std::vector<std::size_t> hp(bins, 0), hq(bins, 0);
        auto index = [&](double x) { return std::min(bins - 1, static_cast<std::size_t>((x - lo) / width)); };
        for (double x : post) ++hp[index(x)];
        for (double x : prior) ++hq[index(x)];
        for (std::size_t b = 0; b < bins; ++b)
            os << r.param_names[p] << ',' << b << ',' << hb::format_double(lo + width * static_cast<double>(b)) << ','
               << hb::format_double(lo + width * static_cast<double>(b + 1)) << ',' << hp[b] << ',' << hq[b] << '\n';
    }
    return os.str();
}

int cmd_calibrate(const cli::RunConfig& cfg) {
    if (cfg.calibration.n_pseudo < hb::kMinPseudoExperiments)
        throw cli::ConfigError("n-pseudo below minimum: got " + std::to_string(cfg.calibration.n_pseudo) + ", need at least " +
                               std::to_string(hb::kMinPseudoExperiments));
    const auto m = load_model(cfg);
    const hb::Model model(m.spec);

    hb::CalibrationConfig cc;
    cc.n_pseudo = cfg.calibration.n_pseudo;
    cc.sampler = cfg.sampler;
    cc.sampler.n_draws = cfg.calibration.draws;
    cc.sampler.n_warmup = cfg.calibration.warmup;
    cc.sampler.n_chains = 1;
    cc.posterior_draws = cfg.calibration.posterior_draws;
    cc.seed = cfg.sampler.seed;
    if (cc.posterior_draws == 0 || cc.posterior_draws > cc.sampler.n_draws)
        throw cli::ConfigError("calibration posterior_draws must be in [1, draws]");
    const auto result = hb::calibration_run(model, m.priors, cc);

    json j = hb::to_json(result);
    j["sampler"] = sampler_json(cc.sampler);
    j["seed"] = cc.seed;

    std::ostringstream ranks;
    ranks << "experiment,parameter,rank\n";
    for (std::size_t p = 0; p < result.n_params(); ++p)
        for (std::size_t i = 0; i < result.rank_statistics[p].size(); ++i)
            ranks << i << ',' << result.param_names[p] << ',' << result.rank_statistics[p][i] << '\n';

    write_file(cfg.output_dir / "calibration.json", dump(j));
    write_file(cfg.output_dir / "ranks.csv", ranks.str());
    write_file(cfg.output_dir / "calibration_hist.csv", overlay_histogram(result, 30));

    if (!result.ranks_uniform()) {
        std::cerr << "histbayes: calibration failure: rank chi-square p-value at or below "
                  << hb::kCalibrationAlpha << '\n';
        return kCalibration;
    }
    return kOk;
}

int fail(int code, const std::string& what) {
    std::cerr << "histbayes: " << what << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian inference for HistFactory-style binned models"};
    app.require_subcommand(1);

    Flags sample_flags, diag_flags, predict_flags, calib_flags;
    auto* sample = app.add_subcommand("sample", "draw posterior chains");
    sample_flags.add(sample);

    std::string diag_chains;
    auto* diagnose = app.add_subcommand("diagnose", "autocorrelation, thinning, ESS and R-hat of a chains file");
    diag_flags.add(diagnose);
    diagnose->add_option("chains_file", diag_chains, "chains CSV")->required();

    std::string predict_kind = "posterior", predict_chains;
    auto* predict = app.add_subcommand("predict", "prior or posterior predictive counts");
    predict_flags.add(predict);
    predict->add_option("--kind", predict_kind, "prior or posterior")->check(CLI::IsMember({"prior", "posterior"}));
    predict->add_option("chains_file", predict_chains, "chains CSV (posterior kind)");

    auto* calibrate = app.add_subcommand("calibrate", "simulation-based calibration");
    calib_flags.add(calibrate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (sample->parsed()) return cmd_sample(sample_flags.load());
        if (diagnose->parsed()) return cmd_diagnose(diag_flags.load(), diag_chains);
        if (predict->parsed()) return cmd_predict(predict_flags.load(), predict_kind, predict_chains);
        if (calibrate->parsed()) return cmd_calibrate(calib_flags.load());
    } catch (const hb::ValidationError& e) {
        return fail(kValidation, std::string("validation error at ") + e.path() + ": " + e.what());
    } catch (const hb::SchemaError& e) {
        return fail(kConfig, std::string("malformed input at ") + e.path() + ": " + e.what());
    } catch (const hb::SyntaxError& e) {
        return fail(kConfig, std::string("malformed input: ") + e.what());
    } catch (const hb::InsufficientDataError& e) {
        return fail(kConfig, e.what());
    } catch (const cli::ConfigError& e) {
        return fail(kConfig, e.what());
    } catch (const hb::MissingPriorError& e) {
        return fail(kConfig, std::string("prior error: ") + e.what());
    } catch (const hb::ImproperPriorError& e) {
        return fail(kConfig, std::string("prior error: ") + e.what());
    } catch (const hb::CalibrationAbort& e) {
        return fail(kSampling, std::string("calibration aborted: ") + e.what());
    } catch (const hb::ChainError& e) {
        return fail(kSampling, std::string("sampling failed in chain ") + std::to_string(e.chain()) + ": " + e.what());
    } catch (const hb::InitializationError& e) {
        return fail(kSampling, std::string("sampling failed: ") + e.what());
    } catch (const hb::NonFiniteGradientError& e) {
        return fail(kSampling, std::string("sampling failed: ") + e.what());
    } catch (const hb::DomainError& e) {
        return fail(kConfig, e.what());
    } catch (const hb::Error& e) {
        return fail(kConfig, e.what());
    } catch (const std::exception& e) {
        return fail(kConfig, e.what());
    }
    return kConfig;
}
