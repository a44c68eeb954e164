#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "histbayes/histbayes.hpp"

#ifndef HISTBAYES_WORKSPACE_DIR
#error "HISTBAYES_WORKSPACE_DIR must point at the workspaces directory"
#endif

namespace fixtures {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string workspace_path(const std::string& name) { return std::string(HISTBAYES_WORKSPACE_DIR) + "/" + name; }

struct ThreeBin {
    histbayes::ModelSpec spec;
    histbayes::ObservationSet obs;
    histbayes::PriorSet priors;

    ThreeBin() {
        std::tie(spec, obs) = histbayes::parse_workspace(read_file(workspace_path("three_bin.json")));
        priors = histbayes::build_priors(
            spec, {{"mu", histbayes::Normal{0.0, 2.0}}, {"bkg_norm", histbayes::Normal{0.0, 2.0}}}, obs);
    }
};

/// HMC settings tuned for the three-bin model.
inline histbayes::SamplerConfig tuned_hmc(std::uint64_t seed, std::size_t draws) {
    histbayes::SamplerConfig c;
    c.kind = histbayes::SamplerKind::HMC;
    c.step_size = 0.05;
    c.n_leapfrog = 30;
    c.n_draws = draws;
    c.n_warmup = 500;
    c.seed = seed;
    return c;
}

inline histbayes::SamplerConfig tuned_mh(std::uint64_t seed, std::size_t draws) {
    histbayes::SamplerConfig c;
    c.kind = histbayes::SamplerKind::MH;
    c.proposal_scale = {1.2, 0.25};
    c.n_draws = draws;
    c.n_warmup = 500;
    c.seed = seed;
    return c;
}

}  // namespace fixtures
