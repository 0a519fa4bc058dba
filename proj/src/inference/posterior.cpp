#include "inference/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>

#include "bench/seeding.hpp"

namespace covbench::inference {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

double logmeanexp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc / static_cast<double>(v.size()));
}

ad::Array single_row(std::span<const double> theta) {
  ad::Array row({1, static_cast<int64_t>(theta.size())});
  std::copy(theta.begin(), theta.end(), row.data());
  return row;
}

// MCMC sampler over an unnormalized posterior target; slice sampling inside
// finite prior bounds, adaptive RWM otherwise.
SampleResult mcmc_posterior_sample(
    const std::function<double(std::span<const double>, const ad::Array&)>& logpdf,
    const tasks::Prior& prior, const PosteriorMcmcConfig& cfg, const ad::Array& y, int n,
    uint64_t seed) {
  if (n == 0) return {ad::Array({0, static_cast<int64_t>(prior.dim)}), false};
  LogTarget target;
  target.dim = prior.dim;
  target.logpdf = [&logpdf, &y](std::span<const double> th) { return logpdf(th, y); };
  if (prior.bounded()) {
    target.lower = prior.lower;
    target.upper = prior.upper;
  }
  target.init = [&prior](core::Rng& rng) {
    std::vector<double> th(static_cast<size_t>(prior.dim));
    prior.sample(rng, th);
    return th;
  };
  McmcConfig mcfg;
  mcfg.chains = cfg.chains;
  mcfg.keep_per_chain = std::max(cfg.keep_per_chain, (n + cfg.chains - 1) / cfg.chains);
  mcfg.rhat_threshold = cfg.rhat_threshold;
  auto run = mcmc_sample(target, mcfg, seed);
  SampleResult out;
  out.mcmc_flagged = run.flagged;
  out.samples = ad::Array({static_cast<int64_t>(n), static_cast<int64_t>(prior.dim)});
  std::copy(run.samples.data(), run.samples.data() + static_cast<int64_t>(n) * prior.dim,
            out.samples.data());
  return out;
}

std::string y_cache_key(const ad::Array& y) {
  std::string key(reinterpret_cast<const char*>(y.data()), static_cast<size_t>(y.size()) * sizeof(double));
  return key;
}

}  // namespace

Posterior npe_posterior(std::shared_ptr<const est::Estimator> e) {
  if (e->kind() != est::EstimatorKind::NPE) throw std::invalid_argument("npe_posterior: estimator kind");
  Posterior p;
  p.kind = Posterior::Kind::NPE;
  p.theta_dim = e->theta_dim();
  p.unnorm_logpdf_rows = [e](const ad::Array& thetas, const ad::Array& y) {
    return e->posterior_logprob_rows(thetas, y);
  };
  p.unnorm_logpdf = [e](std::span<const double> th, const ad::Array& y) {
    return e->posterior_logprob_rows(single_row(th), y)[0];
  };
  p.sample = [e](const ad::Array& y, int n, uint64_t seed) {
    return SampleResult{e->posterior_sample(y, n, seed), false};
  };
  return p;
}

Posterior nle_posterior(std::shared_ptr<const est::Estimator> e, const tasks::Prior& prior,
                        const PosteriorMcmcConfig& cfg) {
  if (e->kind() != est::EstimatorKind::NLE) throw std::invalid_argument("nle_posterior: estimator kind");
  Posterior p;
  p.kind = Posterior::Kind::NLE_MCMC;
  p.theta_dim = e->theta_dim();
  auto logpdf_rows = [e, prior](const ad::Array& thetas, const ad::Array& y) {
    ad::Array ll = e->likelihood_logprob_rows(y, thetas);
    for (int64_t i = 0; i < ll.size(); ++i) {
      std::span<const double> th(thetas.data() + i * thetas.cols(), static_cast<size_t>(thetas.cols()));
      const double pl = prior.logpdf(th);
      ll[i] = std::isfinite(pl) ? ll[i] + pl : pl;
    }
    return ll;
  };
  p.unnorm_logpdf_rows = logpdf_rows;
  p.unnorm_logpdf = [e, prior](std::span<const double> th, const ad::Array& y) {
    const double pl = prior.logpdf(th);
    if (!std::isfinite(pl)) return pl;
    return e->likelihood_logprob_rows(y, single_row(th))[0] + pl;
  };
  auto lp = p.unnorm_logpdf;
  p.sample = [lp, prior, cfg](const ad::Array& y, int n, uint64_t seed) {
    return mcmc_posterior_sample(lp, prior, cfg, y, n, seed);
  };
  return p;
}

Posterior nre_posterior(std::shared_ptr<const est::Estimator> e, const tasks::Prior& prior,
                        const PosteriorMcmcConfig& cfg) {
  if (e->kind() != est::EstimatorKind::NRE) throw std::invalid_argument("nre_posterior: estimator kind");
  Posterior p;
  p.kind = Posterior::Kind::NRE_MCMC;
  p.theta_dim = e->theta_dim();
  p.unnorm_logpdf_rows = [e, prior](const ad::Array& thetas, const ad::Array& y) {
    ad::Array logits = e->logit_rows(thetas, y);
    for (int64_t i = 0; i < logits.size(); ++i) {
      std::span<const double> th(thetas.data() + i * thetas.cols(), static_cast<size_t>(thetas.cols()));
      const double pl = prior.logpdf(th);
      logits[i] = std::isfinite(pl) ? logits[i] + pl : pl;
    }
    return logits;
  };
  p.unnorm_logpdf = [e, prior](std::span<const double> th, const ad::Array& y) {
    const double pl = prior.logpdf(th);
    if (!std::isfinite(pl)) return pl;
    return e->logit_rows(single_row(th), y)[0] + pl;
  };
  auto lp = p.unnorm_logpdf;
  p.sample = [lp, prior, cfg](const ad::Array& y, int n, uint64_t seed) {
    return mcmc_posterior_sample(lp, prior, cfg, y, n, seed);
  };
  return p;
}

Posterior abc_posterior(const AbcResult& result) {
  const ad::Array samples = result.samples;
  const int64_t n = samples.rows();
  const int64_t d = samples.cols();
  if (n < 2) throw std::invalid_argument("abc_posterior: need at least 2 accepted samples");

  // Silverman's per-dimension bandwidth for a product Gaussian kernel.
  std::vector<double> h(static_cast<size_t>(d));
  bool any_spread = false;
  const double factor = std::pow(4.0 / (static_cast<double>(d) + 2.0), 1.0 / (static_cast<double>(d) + 4.0)) *
                        std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(d) + 4.0));
  for (int64_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (int64_t i = 0; i < n; ++i) m += samples.at(i, j);
    m /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t i = 0; i < n; ++i) var += (samples.at(i, j) - m) * (samples.at(i, j) - m);
    var /= static_cast<double>(n - 1);
    const double sd = std::sqrt(var);
    if (sd > 0.0) any_spread = true;
    h[static_cast<size_t>(j)] = std::max(sd * factor, 1e-9 * std::max(1.0, std::fabs(m)));
  }
  if (!any_spread) throw std::invalid_argument("abc_posterior: degenerate accepted set (zero spread)");

  double log_norm = 0.0;
  for (int64_t j = 0; j < d; ++j) log_norm += std::log(h[static_cast<size_t>(j)]) + 0.5 * kLogTwoPi;

  Posterior p;
  p.kind = Posterior::Kind::ABC_KDE;
  p.theta_dim = static_cast<int>(d);
  auto kde = [samples, h, log_norm, n, d](std::span<const double> th) {
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      double q = 0.0;
      for (int64_t j = 0; j < d; ++j) {
        const double z = (th[static_cast<size_t>(j)] - samples.at(i, j)) / h[static_cast<size_t>(j)];
        q += z * z;
      }
      terms[static_cast<size_t>(i)] = -0.5 * q;
      mx = std::max(mx, terms[static_cast<size_t>(i)]);
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - mx);
    return mx + std::log(acc / static_cast<double>(n)) - log_norm;
  };
  p.unnorm_logpdf = [kde](std::span<const double> th, const ad::Array&) { return kde(th); };
  p.unnorm_logpdf_rows = [kde, d](const ad::Array& thetas, const ad::Array&) {
    ad::Array out({thetas.rows()});
    for (int64_t i = 0; i < thetas.rows(); ++i)
      out[i] = kde({thetas.data() + i * d, static_cast<size_t>(d)});
    return out;
  };
  p.sample = [samples, n, d](const ad::Array&, int count, uint64_t seed) {
    core::Rng rng(seed);
    SampleResult out;
    out.samples = ad::Array({static_cast<int64_t>(count), d});
    for (int64_t i = 0; i < count; ++i) {
      const int64_t src = rng.uniform_int(0, n - 1);
      for (int64_t j = 0; j < d; ++j) out.samples.at(i, j) = samples.at(src, j);
    }
    return out;
  };
  return p;
}

Posterior ensemble(std::vector<Posterior> components, const tasks::Prior& prior,
                   const EnsembleConfig& cfg) {
  if (components.empty()) throw std::invalid_argument("ensemble: empty component list");
  const auto kind = components.front().kind;
  const int theta_dim = components.front().theta_dim;
  for (const auto& c : components) {
    if (c.kind != kind) throw std::invalid_argument("ensemble: mixed component kinds");
    if (c.theta_dim != theta_dim) throw std::invalid_argument("ensemble: mixed parameter dimensions");
  }
  const bool needs_norm = cfg.normalize && (kind == Posterior::Kind::NLE_MCMC ||
                                            kind == Posterior::Kind::NRE_MCMC);

  struct Shared {
    std::vector<Posterior> comps;
    tasks::Prior prior;
    EnsembleConfig cfg;
    bool needs_norm;
    std::mutex mu;
    std::map<std::string, std::vector<double>> logz_cache;
  };
  auto sh = std::make_shared<Shared>();
  sh->comps = std::move(components);
  sh->prior = prior;
  sh->cfg = cfg;
  sh->needs_norm = needs_norm;

  // Per-observation normalizing constants via self-normalized importance
  // sampling with the prior as proposal; the same draws serve every
  // component so identical components get identical constants.
  auto logz_of = [sh](const ad::Array& y) -> std::vector<double> {
    const size_t k = sh->comps.size();
    if (!sh->needs_norm) return std::vector<double>(k, 0.0);
    const std::string key = y_cache_key(y);
    {
      std::lock_guard<std::mutex> lock(sh->mu);
      auto it = sh->logz_cache.find(key);
      if (it != sh->logz_cache.end()) return it->second;
    }
    const int m = sh->cfg.is_draws;
    core::Rng rng(bench::derive_seed(sh->cfg.is_seed, {std::string("ensemble-is"),
                                                       static_cast<int64_t>(bench::mix64(std::hash<std::string>{}(key)))}));
    ad::Array draws({m, sh->prior.dim});
    std::vector<double> prior_lp(static_cast<size_t>(m));
    std::vector<double> th(static_cast<size_t>(sh->prior.dim));
    for (int i = 0; i < m; ++i) {
      sh->prior.sample(rng, th);
      for (int j = 0; j < sh->prior.dim; ++j) draws.at(i, j) = th[static_cast<size_t>(j)];
      prior_lp[static_cast<size_t>(i)] = sh->prior.logpdf(th);
    }
    std::vector<double> logz(k);
    std::vector<double> ratios(static_cast<size_t>(m));
    for (size_t c = 0; c < k; ++c) {
      const ad::Array lp = sh->comps[c].unnorm_logpdf_rows(draws, y);
      for (int i = 0; i < m; ++i)
        ratios[static_cast<size_t>(i)] = lp[i] - prior_lp[static_cast<size_t>(i)];
      logz[c] = logmeanexp(ratios);
    }
    std::lock_guard<std::mutex> lock(sh->mu);
    sh->logz_cache.emplace(key, logz);
    return logz;
  };

  Posterior p;
  p.kind = Posterior::Kind::Ensemble;
  p.theta_dim = theta_dim;
  p.unnorm_logpdf_rows = [sh, logz_of](const ad::Array& thetas, const ad::Array& y) {
    const auto logz = logz_of(y);
    const size_t k = sh->comps.size();
    std::vector<ad::Array> lps;
    lps.reserve(k);
    for (size_t c = 0; c < k; ++c) lps.push_back(sh->comps[c].unnorm_logpdf_rows(thetas, y));
    ad::Array out({thetas.rows()});
    std::vector<double> vals(k);
    for (int64_t i = 0; i < thetas.rows(); ++i) {
      for (size_t c = 0; c < k; ++c) vals[c] = lps[c][i] - logz[c];
      out[i] = logmeanexp(vals);
    }
    return out;
  };
  p.unnorm_logpdf = [sh, logz_of](std::span<const double> th, const ad::Array& y) {
    const auto logz = logz_of(y);
    std::vector<double> vals(sh->comps.size());
    for (size_t c = 0; c < sh->comps.size(); ++c)
      vals[c] = sh->comps[c].unnorm_logpdf(th, y) - logz[c];
    return logmeanexp(vals);
  };
  p.sample = [sh](const ad::Array& y, int n, uint64_t seed) {
    const size_t k = sh->comps.size();
    SampleResult out;
    out.samples = ad::Array({static_cast<int64_t>(n), static_cast<int64_t>(sh->comps[0].theta_dim)});
    if (n == 0) return out;
    core::Rng rng(bench::derive_seed(seed, {std::string("ensemble-pick")}));
    std::vector<size_t> pick(static_cast<size_t>(n));
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      pick[static_cast<size_t>(i)] = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(k) - 1));
      counts[pick[static_cast<size_t>(i)]] += 1;
    }
    std::vector<ad::Array> buffers(k);
    for (size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      auto res = sh->comps[c].sample(y, counts[c], bench::derive_seed(seed, {std::string("ensemble-comp"),
                                                                             static_cast<int64_t>(c)}));
      out.mcmc_flagged = out.mcmc_flagged || res.mcmc_flagged;
      buffers[c] = std::move(res.samples);
    }
    std::vector<int64_t> cursor(k, 0);
    const int64_t d = out.samples.cols();
    for (int i = 0; i < n; ++i) {
      const size_t c = pick[static_cast<size_t>(i)];
      for (int64_t j = 0; j < d; ++j) out.samples.at(i, j) = buffers[c].at(cursor[c], j);
      cursor[c] += 1;
    }
    return out;
  };
  return p;
}

}  // namespace covbench::inference
