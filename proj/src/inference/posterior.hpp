#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "ad/array.hpp"
#include "estimators/estimator.hpp"
#include "inference/abc.hpp"
#include "inference/mcmc.hpp"
#include "tasks/distributions.hpp"

namespace covbench::inference {

struct SampleResult {
  ad::Array samples;  // n x theta_dim
  bool mcmc_flagged = false;
};

// Uniform view over every posterior approximation: unnormalized conditional
// log-density plus a sampler, mutually consistent. Densities are defined up
// to an additive constant per observation, which is all HPD membership needs.
struct Posterior {
  enum class Kind { NPE, NLE_MCMC, NRE_MCMC, ABC_KDE, Ensemble };
  Kind kind = Kind::NPE;
  int theta_dim = 0;
  std::function<double(std::span<const double>, const ad::Array& y)> unnorm_logpdf;
  // Batched evaluation; rows of thetas.
  std::function<ad::Array(const ad::Array& thetas, const ad::Array& y)> unnorm_logpdf_rows;
  std::function<SampleResult(const ad::Array& y, int n, uint64_t seed)> sample;
};

struct PosteriorMcmcConfig {
  int chains = 4;
  int keep_per_chain = 1000;
  double rhat_threshold = 1.05;
};

Posterior npe_posterior(std::shared_ptr<const est::Estimator> flow_estimator);

Posterior nle_posterior(std::shared_ptr<const est::Estimator> flow_estimator, const tasks::Prior& prior,
                        const PosteriorMcmcConfig& cfg = {});

Posterior nre_posterior(std::shared_ptr<const est::Estimator> classifier, const tasks::Prior& prior,
                        const PosteriorMcmcConfig& cfg = {});

// Gaussian KDE over the accepted draws (per-dimension Silverman bandwidth);
// the sampler resamples accepted draws with replacement.
Posterior abc_posterior(const AbcResult& result);

struct EnsembleConfig {
  // Mix normalized component densities (per-observation constants estimated
  // by prior-proposal importance sampling for NLE/NRE components).
  bool normalize = true;
  int is_draws = 5000;
  uint64_t is_seed = 0x5eedull;
};

// Uniform mixture of same-kind posteriors. The prior is only consulted when
// normalizing NLE/NRE components.
Posterior ensemble(std::vector<Posterior> components, const tasks::Prior& prior,
                   const EnsembleConfig& cfg = {});

}  // namespace covbench::inference
