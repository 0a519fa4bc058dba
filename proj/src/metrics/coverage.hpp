#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ad/array.hpp"
#include "inference/posterior.hpp"
#include "tasks/tasks.hpp"

namespace covbench::metrics {

struct HpdDecision {
  double credibility = 0.0;  // estimated Pr_{theta~q}[q(theta) > q(theta*)]
  int k = 0;
  bool member(double alpha) const { return credibility <= 1.0 - alpha; }
};

// Monte Carlo HPD membership for theta* under q(.|y): the fraction of K
// posterior draws with strictly larger density. Ties count toward
// membership. Valid for unnormalized densities.
HpdDecision hpd_membership(const inference::Posterior& q, const ad::Array& y,
                           std::span<const double> theta_star, int k, uint64_t seed);

struct CoverageCurve {
  std::vector<double> alpha;      // levels
  std::vector<double> nominal;    // 1 - alpha
  std::vector<double> empirical;  // mean coverage
  std::vector<double> band_lo, band_hi;
  int n_obs = 0;
  int n_ref_per_obs = 0;
  int k_density = 0;
  int flagged_observations = 0;   // posterior sampler diagnostics tripped
  int excluded_observations = 0;  // reference draws unavailable
};

struct DiagonalDeviation {
  double max_below = 0.0;
  double max_above = 0.0;
  double signed_area = 0.0;
};

DiagonalDeviation diagonal_deviation(const CoverageCurve& curve);

// Reference-draw provider: M draws from p(theta | y_i) for observation index
// i of the grid column, or an empty optional when the oracle failed and the
// observation must be excluded.
using RefProvider =
    std::function<std::optional<ad::Array>(int obs_index, const tasks::Observation& obs)>;

struct CoverageConfig {
  std::vector<double> alpha_grid;  // strictly increasing inside (0,1)
  int m_ref = 100;                 // reference draws per observation
  int k_density = 1000;            // q draws per observation
  int bootstrap_resamples = 1000;
  double band_coverage = 0.9;
  uint64_t seed = 0;
  int workers = 1;
};

std::vector<double> default_alpha_grid();  // 0.05 ... 0.95 step 0.05

// One-pass expected-coverage curve over one sigma column of an observation
// grid. One credibility rank per (observation, reference draw) is shared
// across all levels; the band is a cluster bootstrap over observations.
CoverageCurve coverage_curve(const inference::Posterior& q,
                             std::span<const tasks::Observation* const> observations,
                             const RefProvider& refs, const CoverageConfig& cfg);

// Single-level convenience wrapper.
double expected_coverage(const inference::Posterior& q,
                         std::span<const tasks::Observation* const> observations,
                         const RefProvider& refs, double alpha, const CoverageConfig& cfg);

}  // namespace covbench::metrics
