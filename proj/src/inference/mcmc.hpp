#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ad/array.hpp"
#include "core/rng.hpp"

namespace covbench::inference {

struct LogTarget {
  int dim = 0;
  std::function<double(std::span<const double>)> logpdf;
  // Finite bounds on every coordinate select the slice sampler; otherwise an
  // adaptive random-walk Metropolis sweep is used.
  std::vector<double> lower, upper;
  std::function<std::vector<double>(core::Rng&)> init;

  bool bounded() const;
};

struct McmcConfig {
  int chains = 4;
  int keep_per_chain = 1000;
  int warmup = -1;  // -1: warmup equals keep (50% discard)
  double rhat_threshold = 1.05;
  int max_init_tries = 1000;
  double initial_step = 1.0;
};

struct McmcDiag {
  std::vector<double> rhat;  // split-chain, per coordinate
  std::vector<double> ess;   // per coordinate
  double worst_rhat = 0.0;
  bool pass(double threshold) const { return worst_rhat <= threshold; }
  std::string summary() const;
};

struct McmcRun {
  ad::Array samples;  // pooled post-warmup draws, (chains*keep) x dim
  McmcDiag diag;
  bool flagged = false;  // diagnostics exceeded the threshold
};

// Multi-chain MCMC with deterministic per-chain seeding. Throws when no
// finite-density starting point can be found.
McmcRun mcmc_sample(const LogTarget& target, const McmcConfig& cfg, uint64_t seed);

}  // namespace covbench::inference
