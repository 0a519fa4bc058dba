#include "metrics/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bench/seeding.hpp"
#include "bench/workers.hpp"

namespace covbench::metrics {

namespace {

// credibility = fraction of sorted density draws strictly greater than lstar
double credibility_of(const std::vector<double>& sorted_density, double lstar) {
  const auto it = std::upper_bound(sorted_density.begin(), sorted_density.end(), lstar);
  const auto greater = static_cast<double>(sorted_density.end() - it);
  return greater / static_cast<double>(sorted_density.size());
}

}  // namespace

HpdDecision hpd_membership(const inference::Posterior& q, const ad::Array& y,
                           std::span<const double> theta_star, int k, uint64_t seed) {
  if (k < 100) throw std::invalid_argument("hpd_membership: K must be >= 100");
  auto draw = q.sample(y, k, seed);
  ad::Array dens = q.unnorm_logpdf_rows(draw.samples, y);
  std::vector<double> sorted(dens.data(), dens.data() + dens.size());
  std::sort(sorted.begin(), sorted.end());
  const double lstar = q.unnorm_logpdf(theta_star, y);
  HpdDecision d;
  d.k = k;
  d.credibility = credibility_of(sorted, lstar);
  return d;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 19; ++i) g.push_back(0.05 * i);
  return g;
}

DiagonalDeviation diagonal_deviation(const CoverageCurve& curve) {
  if (curve.nominal.empty()) throw std::invalid_argument("diagonal_deviation: empty curve");
  DiagonalDeviation dev;
  for (size_t i = 0; i < curve.nominal.size(); ++i) {
    const double diff = curve.empirical[i] - curve.nominal[i];
    dev.max_above = std::max(dev.max_above, diff);
    dev.max_below = std::max(dev.max_below, -diff);
  }
  // trapezoid integral of (empirical - nominal) over increasing nominal;
  // the alpha grid ascends so nominal descends in index order
  for (size_t i = 0; i + 1 < curve.nominal.size(); ++i) {
    const double d0 = curve.empirical[i] - curve.nominal[i];
    const double d1 = curve.empirical[i + 1] - curve.nominal[i + 1];
    dev.signed_area += 0.5 * (d0 + d1) * std::fabs(curve.nominal[i + 1] - curve.nominal[i]);
  }
  return dev;
}

CoverageCurve coverage_curve(const inference::Posterior& q,
                             std::span<const tasks::Observation* const> observations,
                             const RefProvider& refs, const CoverageConfig& cfg) {
  if (observations.empty()) throw std::invalid_argument("coverage_curve: no observations");
  for (size_t i = 1; i < cfg.alpha_grid.size(); ++i)
    if (!(cfg.alpha_grid[i] > cfg.alpha_grid[i - 1]))
      throw std::invalid_argument("coverage_curve: alpha grid must be strictly increasing");
  if (!cfg.alpha_grid.empty() &&
      !(cfg.alpha_grid.front() > 0.0 && cfg.alpha_grid.back() < 1.0))
    throw std::invalid_argument("coverage_curve: alpha grid must lie inside (0,1)");

  const int n_obs = static_cast<int>(observations.size());
  const size_t n_alpha = cfg.alpha_grid.size();

  // Per observation: credibility of each reference draw, shared across all
  // levels. Empty vector = excluded observation.
  std::vector<std::vector<double>> creds(static_cast<size_t>(n_obs));
  std::vector<char> flagged(static_cast<size_t>(n_obs), 0);
  std::vector<char> excluded(static_cast<size_t>(n_obs), 0);

  bench::parallel_for(n_obs, cfg.workers, [&](int64_t i) {
    const tasks::Observation& obs = *observations[static_cast<size_t>(i)];
    auto ref_draws = refs(static_cast<int>(i), obs);
    if (!ref_draws.has_value()) {
      excluded[static_cast<size_t>(i)] = 1;
      return;
    }
    const uint64_t obs_seed = bench::derive_seed(cfg.seed, {std::string("hpd"), static_cast<int64_t>(obs.index),
                                                            static_cast<int64_t>(obs.sigma)});
    auto draw = q.sample(obs.y, cfg.k_density, obs_seed);
    if (draw.mcmc_flagged) flagged[static_cast<size_t>(i)] = 1;
    ad::Array dens = q.unnorm_logpdf_rows(draw.samples, obs.y);
    std::vector<double> sorted(dens.data(), dens.data() + dens.size());
    std::sort(sorted.begin(), sorted.end());

    const int m = std::min<int>(cfg.m_ref, static_cast<int>(ref_draws->rows()));
    ad::Array stars({m, ref_draws->cols()});
    std::copy(ref_draws->data(), ref_draws->data() + static_cast<int64_t>(m) * ref_draws->cols(),
              stars.data());
    ad::Array lstars = q.unnorm_logpdf_rows(stars, obs.y);
    auto& cred_i = creds[static_cast<size_t>(i)];
    cred_i.resize(static_cast<size_t>(m));
    for (int r = 0; r < m; ++r) cred_i[static_cast<size_t>(r)] = credibility_of(sorted, lstars[r]);
  });

  // Per observation and level, the count of covered reference draws.
  std::vector<std::vector<int>> cover_counts(static_cast<size_t>(n_obs),
                                             std::vector<int>(n_alpha, 0));
  std::vector<int> m_per_obs(static_cast<size_t>(n_obs), 0);
  int64_t total_pairs = 0;
  for (int i = 0; i < n_obs; ++i) {
    const auto& cred_i = creds[static_cast<size_t>(i)];
    m_per_obs[static_cast<size_t>(i)] = static_cast<int>(cred_i.size());
    total_pairs += static_cast<int64_t>(cred_i.size());
    for (double c : cred_i)
      for (size_t a = 0; a < n_alpha; ++a)
        if (c <= 1.0 - cfg.alpha_grid[a]) cover_counts[static_cast<size_t>(i)][a] += 1;
  }
  if (total_pairs == 0) throw std::runtime_error("coverage_curve: every observation was excluded");

  CoverageCurve curve;
  curve.alpha = cfg.alpha_grid;
  curve.nominal.resize(n_alpha);
  curve.empirical.resize(n_alpha);
  curve.band_lo.resize(n_alpha);
  curve.band_hi.resize(n_alpha);
  curve.n_obs = n_obs;
  curve.n_ref_per_obs = cfg.m_ref;
  curve.k_density = cfg.k_density;
  for (int i = 0; i < n_obs; ++i) {
    curve.flagged_observations += flagged[static_cast<size_t>(i)];
    curve.excluded_observations += excluded[static_cast<size_t>(i)];
  }
  for (size_t a = 0; a < n_alpha; ++a) {
    curve.nominal[a] = 1.0 - cfg.alpha_grid[a];
    int64_t covered = 0;
    for (int i = 0; i < n_obs; ++i) covered += cover_counts[static_cast<size_t>(i)][a];
    curve.empirical[a] = static_cast<double>(covered) / static_cast<double>(total_pairs);
  }

  // Cluster bootstrap over observations.
  const std::vector<int> usable = [&] {
    std::vector<int> u;
    for (int i = 0; i < n_obs; ++i)
      if (m_per_obs[static_cast<size_t>(i)] > 0) u.push_back(i);
    return u;
  }();
  core::Rng boot_rng(bench::derive_seed(cfg.seed, {std::string("bootstrap")}));
  std::vector<std::vector<double>> boot(n_alpha);
  for (auto& b : boot) b.reserve(static_cast<size_t>(cfg.bootstrap_resamples));
  for (int b = 0; b < cfg.bootstrap_resamples; ++b) {
    int64_t denom = 0;
    std::vector<int64_t> num(n_alpha, 0);
    for (size_t j = 0; j < usable.size(); ++j) {
      const int pick = usable[static_cast<size_t>(boot_rng.uniform_int(0, static_cast<int64_t>(usable.size()) - 1))];
      denom += m_per_obs[static_cast<size_t>(pick)];
      for (size_t a = 0; a < n_alpha; ++a) num[a] += cover_counts[static_cast<size_t>(pick)][a];
    }
    for (size_t a = 0; a < n_alpha; ++a)
      boot[a].push_back(static_cast<double>(num[a]) / static_cast<double>(std::max<int64_t>(denom, 1)));
  }
  const double tail = 0.5 * (1.0 - cfg.band_coverage);
  for (size_t a = 0; a < n_alpha; ++a) {
    auto& v = boot[a];
    std::sort(v.begin(), v.end());
    auto quantile = [&](double p) {
      const double idx = p * static_cast<double>(v.size() - 1);
      const auto lo = static_cast<size_t>(std::floor(idx));
      const auto hi = std::min(lo + 1, v.size() - 1);
      const double w = idx - static_cast<double>(lo);
      return (1.0 - w) * v[lo] + w * v[hi];
    };
    curve.band_lo[a] = quantile(tail);
    curve.band_hi[a] = quantile(1.0 - tail);
  }
  return curve;
}

double expected_coverage(const inference::Posterior& q,
                         std::span<const tasks::Observation* const> observations,
                         const RefProvider& refs, double alpha, const CoverageConfig& cfg) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("expected_coverage: alpha in (0,1)");
  CoverageConfig one = cfg;
  one.alpha_grid = {alpha};
  one.bootstrap_resamples = std::max(1, cfg.bootstrap_resamples);
  return coverage_curve(q, observations, refs, one).empirical[0];
}

}  // namespace covbench::metrics
