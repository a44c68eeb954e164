#pragma once

// Bayesian inference for HistFactory-style binned models.

#include "histbayes/chain_io.hpp"
#include "histbayes/diagnostics.hpp"
#include "histbayes/distributions.hpp"
#include "histbayes/dual.hpp"
#include "histbayes/error.hpp"
#include "histbayes/model.hpp"
#include "histbayes/predictive.hpp"
#include "histbayes/priors.hpp"
#include "histbayes/rng.hpp"
#include "histbayes/samplers.hpp"
#include "histbayes/special.hpp"
#include "histbayes/stats.hpp"
#include "histbayes/workspace.hpp"
