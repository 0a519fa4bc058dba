#include "inference/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bench/seeding.hpp"

namespace covbench::inference {

bool LogTarget::bounded() const {
  if (dim == 0 || lower.size() != static_cast<size_t>(dim) || upper.size() != static_cast<size_t>(dim))
    return false;
  for (int i = 0; i < dim; ++i)
    if (!std::isfinite(lower[static_cast<size_t>(i)]) || !std::isfinite(upper[static_cast<size_t>(i)]))
      return false;
  return true;
}

std::string McmcDiag::summary() const {
  std::ostringstream os;
  os << "worst split-Rhat " << worst_rhat << " over " << rhat.size() << " coordinates";
  return os.str();
}

namespace {

struct Chain {
  std::vector<double> state;
  double logp = 0.0;
  std::vector<double> step;       // RWM per-coordinate proposal sd
  std::vector<int> accepts;       // per-coordinate, current adaptation block
  int block_iters = 0;
};

void rwm_sweep(Chain& ch, const LogTarget& target, core::Rng& rng, bool adapt) {
  const int d = target.dim;
  std::vector<double>& x = ch.state;
  for (int j = 0; j < d; ++j) {
    const double old = x[static_cast<size_t>(j)];
    x[static_cast<size_t>(j)] = old + ch.step[static_cast<size_t>(j)] * rng.normal();
    const double lp = target.logpdf(x);
    const double u = rng.uniform();
    if (std::isfinite(lp) && std::log(std::max(u, 1e-300)) < lp - ch.logp) {
      ch.logp = lp;
      ch.accepts[static_cast<size_t>(j)] += 1;
    } else {
      x[static_cast<size_t>(j)] = old;
    }
  }
  ch.block_iters += 1;
  if (adapt && ch.block_iters >= 50) {
    for (int j = 0; j < d; ++j) {
      const double rate = static_cast<double>(ch.accepts[static_cast<size_t>(j)]) / ch.block_iters;
      double f = std::exp(1.5 * (rate - 0.44));
      f = std::clamp(f, 0.5, 2.0);
      auto& s = ch.step[static_cast<size_t>(j)];
      s = std::clamp(s * f, 1e-8, 1e6);
      ch.accepts[static_cast<size_t>(j)] = 0;
    }
    ch.block_iters = 0;
  }
}

void slice_sweep(Chain& ch, const LogTarget& target, core::Rng& rng) {
  const int d = target.dim;
  std::vector<double>& x = ch.state;
  for (int j = 0; j < d; ++j) {
    const double level = ch.logp + std::log(std::max(rng.uniform(), 1e-300));
    double lo = target.lower[static_cast<size_t>(j)];
    double hi = target.upper[static_cast<size_t>(j)];
    const double cur = x[static_cast<size_t>(j)];
    // Shrinkage from the full prior interval; crossing between separated
    // modes happens whenever the uniform draw lands in another slice segment.
    for (int tries = 0; tries < 1000; ++tries) {
      const double cand = rng.uniform(lo, hi);
      x[static_cast<size_t>(j)] = cand;
      const double lp = target.logpdf(x);
      if (lp > level) {
        ch.logp = lp;
        break;
      }
      if (cand < cur)
        lo = cand;
      else
        hi = cand;
      x[static_cast<size_t>(j)] = cur;  // restore until accepted
    }
  }
}

void split_rhat_ess(const std::vector<std::vector<double>>& chains_coord, McmcDiag& diag) {
  // chains_coord: per chain, the kept draws of one coordinate
  const size_t m0 = chains_coord.size();
  const size_t len = chains_coord[0].size() / 2 * 2;
  const size_t half = len / 2;
  std::vector<std::pair<const double*, size_t>> halves;
  for (const auto& c : chains_coord) {
    halves.emplace_back(c.data(), half);
    halves.emplace_back(c.data() + half, half);
  }
  const size_t m = halves.size();
  std::vector<double> means(m), vars(m);
  double grand = 0.0;
  for (size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (size_t t = 0; t < half; ++t) s += halves[i].first[t];
    means[i] = s / static_cast<double>(half);
    grand += means[i];
  }
  grand /= static_cast<double>(m);
  double w = 0.0, b = 0.0;
  for (size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (size_t t = 0; t < half; ++t) {
      const double d = halves[i].first[t] - means[i];
      s += d * d;
    }
    vars[i] = s / static_cast<double>(half - 1);
    w += vars[i];
    const double dm = means[i] - grand;
    b += dm * dm;
  }
  w /= static_cast<double>(m);
  b = b * static_cast<double>(half) / static_cast<double>(m - 1);
  const double var_plus = (static_cast<double>(half - 1) / half) * w + b / static_cast<double>(half);
  double rhat;
  if (w <= 0.0)
    rhat = b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  else
    rhat = std::sqrt(var_plus / w);
  diag.rhat.push_back(rhat);

  // Geyer-style truncated autocorrelation ESS over the original chains.
  const size_t n = chains_coord[0].size();
  double mean_all = 0.0;
  for (const auto& c : chains_coord)
    for (double v : c) mean_all += v;
  mean_all /= static_cast<double>(m0 * n);
  double var_all = 0.0;
  for (const auto& c : chains_coord)
    for (double v : c) var_all += (v - mean_all) * (v - mean_all);
  var_all /= static_cast<double>(m0 * n);
  double ess;
  if (var_all <= 0.0) {
    ess = static_cast<double>(m0 * n);
  } else {
    double sum_rho = 0.0;
    for (size_t lag = 1; lag + 1 < n; lag += 2) {
      double r1 = 0.0, r2 = 0.0;
      size_t cnt1 = 0, cnt2 = 0;
      for (const auto& c : chains_coord) {
        for (size_t t = 0; t + lag < n; ++t) { r1 += (c[t] - mean_all) * (c[t + lag] - mean_all); ++cnt1; }
        for (size_t t = 0; t + lag + 1 < n; ++t) { r2 += (c[t] - mean_all) * (c[t + lag + 1] - mean_all); ++cnt2; }
      }
      r1 /= static_cast<double>(cnt1) * var_all;
      r2 /= static_cast<double>(cnt2) * var_all;
      const double pair_sum = r1 + r2;
      if (pair_sum < 0.0) break;
      sum_rho += pair_sum;
      if (lag > 200) break;  // diagnostics only; cap the quadratic scan
    }
    ess = static_cast<double>(m0 * n) / (1.0 + 2.0 * sum_rho);
  }
  diag.ess.push_back(std::min(ess, static_cast<double>(m0 * n)));
}

}  // namespace

McmcRun mcmc_sample(const LogTarget& target, const McmcConfig& cfg, uint64_t seed) {
  if (target.dim <= 0 || !target.logpdf || !target.init)
    throw std::invalid_argument("mcmc_sample: incomplete target");
  const int warmup = cfg.warmup >= 0 ? cfg.warmup : cfg.keep_per_chain;
  const bool use_slice = target.bounded();

  std::vector<std::vector<std::vector<double>>> kept(
      static_cast<size_t>(cfg.chains),
      std::vector<std::vector<double>>(static_cast<size_t>(target.dim)));

  for (int c = 0; c < cfg.chains; ++c) {
    core::Rng rng(bench::derive_seed(seed, {std::string("chain"), static_cast<int64_t>(c)}));
    Chain ch;
    ch.step.assign(static_cast<size_t>(target.dim), cfg.initial_step);
    ch.accepts.assign(static_cast<size_t>(target.dim), 0);
    bool found = false;
    for (int tries = 0; tries < cfg.max_init_tries; ++tries) {
      ch.state = target.init(rng);
      const double lp = target.logpdf(ch.state);
      if (std::isfinite(lp)) {
        ch.logp = lp;
        found = true;
        break;
      }
    }
    if (!found)
      throw std::runtime_error("mcmc_sample: no finite-density start after " +
                               std::to_string(cfg.max_init_tries) + " initialization draws");

    for (int it = 0; it < warmup; ++it) {
      if (use_slice)
        slice_sweep(ch, target, rng);
      else
        rwm_sweep(ch, target, rng, /*adapt=*/true);
    }
    for (int it = 0; it < cfg.keep_per_chain; ++it) {
      if (use_slice)
        slice_sweep(ch, target, rng);
      else
        rwm_sweep(ch, target, rng, /*adapt=*/false);
      for (int j = 0; j < target.dim; ++j)
        kept[static_cast<size_t>(c)][static_cast<size_t>(j)].push_back(ch.state[static_cast<size_t>(j)]);
    }
  }

  McmcRun run;
  run.samples = ad::Array({static_cast<int64_t>(cfg.chains) * cfg.keep_per_chain, target.dim});
  // Round-robin pooling so that any prefix of the pooled draws covers all
  // chains evenly.
  for (int it = 0; it < cfg.keep_per_chain; ++it)
    for (int c = 0; c < cfg.chains; ++c) {
      const int64_t row = static_cast<int64_t>(it) * cfg.chains + c;
      for (int j = 0; j < target.dim; ++j)
        run.samples.at(row, j) = kept[static_cast<size_t>(c)][static_cast<size_t>(j)][static_cast<size_t>(it)];
    }

  for (int j = 0; j < target.dim; ++j) {
    std::vector<std::vector<double>> coord;
    coord.reserve(static_cast<size_t>(cfg.chains));
    for (int c = 0; c < cfg.chains; ++c) coord.push_back(kept[static_cast<size_t>(c)][static_cast<size_t>(j)]);
    split_rhat_ess(coord, run.diag);
  }
  run.diag.worst_rhat = *std::max_element(run.diag.rhat.begin(), run.diag.rhat.end());
  run.flagged = !run.diag.pass(cfg.rhat_threshold);
  return run;
}

}  // namespace covbench::inference
