#include "tasks/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "bench/seeding.hpp"

namespace covbench::tasks {

namespace {

constexpr int kSeriesLen = 100;
constexpr double kTgPriorSd = 5.0;
// Volatility-shock window, 1-based inclusive [50, 65].
constexpr int kSvWindowLo = 50;
constexpr int kSvWindowHi = 65;
// Latent log-volatility clamp; keeps exp(s) finite for extreme prior draws.
constexpr double kSvLogScaleClamp = 650.0;

double mean_of(const ad::Array& x) {
  double acc = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) acc += x[i];
  return acc / static_cast<double>(x.size());
}

double sample_sd(const ad::Array& x) {
  const double m = mean_of(x);
  double acc = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) acc += (x[i] - m) * (x[i] - m);
  return std::sqrt(acc / static_cast<double>(x.size() - 1));
}

double median_of(std::vector<double> v) {
  const size_t n = v.size();
  std::sort(v.begin(), v.end());
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TaskName task_from_string(const std::string& id) {
  if (id == "tg") return TaskName::TG;
  if (id == "tg_ss") return TaskName::TG_SS;
  if (id == "sv") return TaskName::SV;
  if (id == "sv_ss") return TaskName::SV_SS;
  if (id == "slcp") return TaskName::SLCP;
  throw std::invalid_argument("unknown task: " + id);
}

std::string task_to_string(TaskName name) {
  switch (name) {
    case TaskName::TG: return "tg";
    case TaskName::TG_SS: return "tg_ss";
    case TaskName::SV: return "sv";
    case TaskName::SV_SS: return "sv_ss";
    case TaskName::SLCP: return "slcp";
  }
  return "?";
}

// --- Toy Gaussian ---

ad::Array tg_simulate(double theta, uint64_t seed) {
  core::Rng rng(seed);
  ad::Array x({kSeriesLen});
  for (int64_t i = 0; i < kSeriesLen; ++i) x[i] = theta + rng.normal();
  return x;
}

ad::Array tg_summary(const ad::Array& x) {
  return ad::Array::vec({mean_of(x), sample_sd(x)});
}

ad::Array tg_transform(const ad::Array& x, int sigma, const ad::Array& z) {
  if (sigma == 0) return x;
  if (z.size() != x.size()) throw std::invalid_argument("tg_transform: aux noise length mismatch");
  ad::Array y = x;
  for (int64_t i = 0; i < y.size(); ++i) y[i] += sigma * z[i];
  return y;
}

void tg_conjugate(double ybar, int n_data, double* mu_n, double* var_n) {
  const double prior_prec = 1.0 / (kTgPriorSd * kTgPriorSd);
  const double prec = prior_prec + static_cast<double>(n_data);
  *var_n = 1.0 / prec;
  *mu_n = ybar * static_cast<double>(n_data) / prec;
}

namespace {

double tg_ybar_of(const ad::Array& y) {
  // Accepts the raw (possibly transformed) series or its (mean, sd) summary.
  if (y.size() == 2) return y[0];
  return mean_of(y);
}

ReferenceOracle tg_reference_oracle() {
  ReferenceOracle ref;
  ref.kind = ReferenceOracle::Kind::ConjugateClosedForm;
  ref.sample = [](const ad::Array& y, int n, uint64_t seed) {
    double mu, var;
    tg_conjugate(tg_ybar_of(y), kSeriesLen, &mu, &var);
    const double sd = std::sqrt(var);
    core::Rng rng(seed);
    ad::Array out({n, 1});
    for (int64_t i = 0; i < n; ++i) out[i] = mu + sd * rng.normal();
    return out;
  };
  ref.logpdf = [](std::span<const double> theta, const ad::Array& y) {
    double mu, var;
    tg_conjugate(tg_ybar_of(y), kSeriesLen, &mu, &var);
    return gaussian_logpdf(theta[0], mu, std::sqrt(var));
  };
  return ref;
}

}  // namespace

// --- Stochastic Volatility ---

ad::Array sv_simulate(std::span<const double> theta, uint64_t seed) {
  const double tau = theta[0];
  const double nu = theta[1];
  if (!(tau > 0.0) || !(nu > 0.0)) throw std::invalid_argument("sv_simulate: tau and nu must be positive");
  core::Rng rng(seed);
  const double step_sd = 1.0 / tau;  // walk variance tau^-2
  ad::Array x({kSeriesLen});
  double s = rng.normal(0.0, step_sd);  // s_0
  for (int64_t i = 0; i < kSeriesLen; ++i) {
    s = rng.normal(s, step_sd);
    const double log_scale = std::clamp(s, -kSvLogScaleClamp, kSvLogScaleClamp);
    x[i] = rng.student_t(nu, 0.0, std::exp(log_scale));
  }
  return x;
}

ad::Array sv_summary(const ad::Array& x) {
  std::vector<double> v(x.data(), x.data() + x.size());
  const double med = median_of(v);
  std::vector<double> dev(v.size());
  for (size_t i = 0; i < v.size(); ++i) dev[i] = std::fabs(v[i] - med);
  const double mad = median_of(dev);
  return ad::Array::vec({mean_of(x), sample_sd(x), med, mad});
}

ad::Array sv_transform(const ad::Array& x, int sigma) {
  // sigma = 0 is the identity by definition; the window formula below would
  // zero the window instead, so it is special-cased.
  if (sigma == 0) return x;
  ad::Array y = x;
  for (int i = kSvWindowLo; i <= kSvWindowHi; ++i) y[i - 1] *= 5.0 * sigma;
  return y;
}

double sv_log_joint(std::span<const double> state, const ad::Array& y) {
  // state = (log tau, log nu, s_0..s_100)
  const double log_tau = state[0];
  const double log_nu = state[1];
  const double tau = std::exp(log_tau);
  const double nu = std::exp(log_nu);
  if (!std::isfinite(tau) || !std::isfinite(nu) || tau <= 0.0 || nu <= 0.0)
    return -std::numeric_limits<double>::infinity();
  const double step_sd = 1.0 / tau;
  double lp = gamma_logpdf(tau, 5.0, 25.0) + log_tau + gamma_logpdf(nu, 5.0, 1.0) + log_nu;
  lp += gaussian_logpdf(state[2], 0.0, step_sd);
  for (int i = 1; i <= kSeriesLen; ++i)
    lp += gaussian_logpdf(state[static_cast<size_t>(2 + i)], state[static_cast<size_t>(1 + i)], step_sd);
  for (int i = 1; i <= kSeriesLen; ++i) {
    const double s = std::clamp(state[static_cast<size_t>(2 + i)], -kSvLogScaleClamp, kSvLogScaleClamp);
    lp += student_t_logpdf(y[i - 1], nu, 0.0, std::exp(s));
  }
  return lp;
}

namespace {

ReferenceOracle sv_reference_oracle(const Prior& prior, const McmcOracleConfig& ocfg) {
  ReferenceOracle ref;
  ref.kind = ReferenceOracle::Kind::Mcmc;
  ref.sample = [prior, ocfg](const ad::Array& y, int n, uint64_t seed) {
    if (y.size() != kSeriesLen) throw std::invalid_argument("sv reference: observation must have length 100");
    if (n == 0) return ad::Array({0, 2});
    inference::LogTarget target;
    target.dim = 2 + kSeriesLen + 1;
    target.logpdf = [y](std::span<const double> st) { return sv_log_joint(st, y); };
    target.init = [prior](core::Rng& rng) {
      std::vector<double> st(static_cast<size_t>(2 + kSeriesLen + 1));
      double th[2];
      prior.sample(rng, {th, 2});
      st[0] = std::log(th[0]);
      st[1] = std::log(th[1]);
      const double step_sd = 1.0 / th[0];
      double s = rng.normal(0.0, step_sd);
      st[2] = s;
      for (int i = 1; i <= kSeriesLen; ++i) {
        s = rng.normal(s, step_sd);
        st[static_cast<size_t>(2 + i)] = s;
      }
      return st;
    };
    inference::McmcConfig mcfg;
    mcfg.chains = ocfg.chains;
    mcfg.keep_per_chain = std::max(ocfg.keep_per_chain, (n + ocfg.chains - 1) / ocfg.chains);
    mcfg.rhat_threshold = ocfg.rhat_threshold;
    mcfg.initial_step = 0.5;
    auto run = inference::mcmc_sample(target, mcfg, seed);
    // Diagnostics gate only the parameters of interest; the latent path is a
    // nuisance block whose tail coordinates mix slowest.
    double worst = std::max(run.diag.rhat[0], run.diag.rhat[1]);
    if (worst > ocfg.rhat_threshold) {
      inference::McmcDiag d;
      d.rhat = {run.diag.rhat[0], run.diag.rhat[1]};
      d.ess = {run.diag.ess[0], run.diag.ess[1]};
      d.worst_rhat = worst;
      throw OracleError("sv reference oracle failed diagnostics: " + d.summary(), d);
    }
    ad::Array out({n, 2});
    for (int64_t i = 0; i < n; ++i) {
      out.at(i, 0) = std::exp(run.samples.at(i, 0));
      out.at(i, 1) = std::exp(run.samples.at(i, 1));
    }
    return out;
  };
  return ref;
}

}  // namespace

// --- SLCP ---

ad::Array slcp_simulate(std::span<const double> theta, uint64_t seed) {
  const double s1 = theta[2] * theta[2];
  const double s2 = theta[3] * theta[3];
  const double rho = std::tanh(theta[4]);
  double c11 = s1 * s1, c22 = s2 * s2;
  const double c12 = rho * s1 * s2;
  if (s1 == 0.0 || s2 == 0.0) {
    c11 += 1e-6;
    c22 += 1e-6;
  }
  // Cholesky of the 2x2 covariance
  const double la = std::sqrt(c11);
  const double lb = c12 / la;
  const double lc = std::sqrt(std::max(c22 - lb * lb, 0.0));
  core::Rng rng(seed);
  ad::Array x({8});
  for (int d = 0; d < 4; ++d) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    x[2 * d] = theta[0] + la * z1;
    x[2 * d + 1] = theta[1] + lb * z1 + lc * z2;
  }
  return x;
}

ad::Array slcp_transform(const ad::Array& x, int sigma, const ad::Array& z) {
  if (sigma == 0) return x;
  if (z.size() != x.size()) throw std::invalid_argument("slcp_transform: aux noise length mismatch");
  ad::Array y = x;
  for (int64_t i = 0; i < y.size(); ++i) y[i] += 100.0 * sigma * z[i];
  return y;
}

double slcp_loglik(std::span<const double> theta, const ad::Array& y) {
  const double s1 = theta[2] * theta[2];
  const double s2 = theta[3] * theta[3];
  const double rho = std::tanh(theta[4]);
  const double c11 = s1 * s1, c22 = s2 * s2;
  const double c12 = rho * s1 * s2;
  const double det = c11 * c22 - c12 * c12;
  if (!(det > 0.0)) return -std::numeric_limits<double>::infinity();
  constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
  double lp = 0.0;
  for (int d = 0; d < 4; ++d) {
    const double d1 = y[2 * d] - theta[0];
    const double d2 = y[2 * d + 1] - theta[1];
    const double quad = (d1 * d1 * c22 - 2.0 * d1 * d2 * c12 + d2 * d2 * c11) / det;
    lp += -kLogTwoPi - 0.5 * std::log(det) - 0.5 * quad;
  }
  return lp;
}

namespace {

ReferenceOracle slcp_reference_oracle(const Prior& prior, const McmcOracleConfig& ocfg) {
  ReferenceOracle ref;
  ref.kind = ReferenceOracle::Kind::Mcmc;
  ref.sample = [prior, ocfg](const ad::Array& y, int n, uint64_t seed) {
    if (y.size() != 8) throw std::invalid_argument("slcp reference: observation must have length 8");
    if (n == 0) return ad::Array({0, 5});
    inference::LogTarget target;
    target.dim = 5;
    target.lower = prior.lower;
    target.upper = prior.upper;
    target.logpdf = [y](std::span<const double> th) { return slcp_loglik(th, y); };
    target.init = [prior](core::Rng& rng) {
      std::vector<double> th(5);
      prior.sample(rng, th);
      return th;
    };
    inference::McmcConfig mcfg;
    mcfg.chains = ocfg.chains;
    mcfg.keep_per_chain = std::max(ocfg.keep_per_chain, (n + ocfg.chains - 1) / ocfg.chains);
    mcfg.rhat_threshold = ocfg.rhat_threshold;
    auto run = inference::mcmc_sample(target, mcfg, seed);
    if (run.flagged)
      throw OracleError("slcp reference oracle failed diagnostics: " + run.diag.summary(), run.diag);
    ad::Array out({n, 5});
    std::copy(run.samples.data(), run.samples.data() + n * 5, out.data());
    return out;
  };
  return ref;
}

ad::Array identity_summary(const ad::Array& raw) { return raw; }

}  // namespace

Task make_task(TaskName name, const McmcOracleConfig& oracle_cfg) {
  Task t;
  t.name = name;
  t.id = task_to_string(name);
  switch (name) {
    case TaskName::TG:
    case TaskName::TG_SS: {
      t.theta_dim = 1;
      t.raw_dim = kSeriesLen;
      t.has_summary = name == TaskName::TG_SS;
      t.x_dim = t.has_summary ? 2 : kSeriesLen;
      t.aux_dim = kSeriesLen;
      t.prior = gaussian_prior(0.0, kTgPriorSd);
      t.simulate = [](std::span<const double> th, uint64_t seed) { return tg_simulate(th[0], seed); };
      t.summary = t.has_summary ? std::function<ad::Array(const ad::Array&)>(tg_summary) : identity_summary;
      t.sample_aux = [](core::Rng& rng) {
        ad::Array z({kSeriesLen});
        for (int64_t i = 0; i < kSeriesLen; ++i) z[i] = rng.normal();
        return z;
      };
      t.transform = [](const ad::Array& raw, int sigma, const ad::Array& z) {
        return tg_transform(raw, sigma, z);
      };
      t.reference = tg_reference_oracle();
      break;
    }
    case TaskName::SV:
    case TaskName::SV_SS: {
      t.theta_dim = 2;
      t.raw_dim = kSeriesLen;
      t.has_summary = name == TaskName::SV_SS;
      t.x_dim = t.has_summary ? 4 : kSeriesLen;
      t.aux_dim = 0;
      t.prior = gamma_prior({5.0, 5.0}, {25.0, 1.0});
      t.simulate = [](std::span<const double> th, uint64_t seed) { return sv_simulate(th, seed); };
      t.summary = t.has_summary ? std::function<ad::Array(const ad::Array&)>(sv_summary) : identity_summary;
      t.sample_aux = [](core::Rng&) { return ad::Array({0}); };
      t.transform = [](const ad::Array& raw, int sigma, const ad::Array&) { return sv_transform(raw, sigma); };
      t.reference = sv_reference_oracle(t.prior, oracle_cfg);
      break;
    }
    case TaskName::SLCP: {
      t.theta_dim = 5;
      t.raw_dim = 8;
      t.has_summary = false;
      t.x_dim = 8;
      t.aux_dim = 8;
      t.prior = uniform_box_prior(5, -3.0, 3.0);
      t.simulate = [](std::span<const double> th, uint64_t seed) { return slcp_simulate(th, seed); };
      t.summary = identity_summary;
      t.sample_aux = [](core::Rng& rng) {
        ad::Array z({8});
        for (int d = 0; d < 4; ++d) {
          const double sd = d == 2 ? std::sqrt(2.0) : 1.0;  // third draw has variance 2
          z[2 * d] = rng.normal(0.0, sd);
          z[2 * d + 1] = rng.normal(0.0, sd);
        }
        return z;
      };
      t.transform = [](const ad::Array& raw, int sigma, const ad::Array& z) {
        return slcp_transform(raw, sigma, z);
      };
      t.reference = slcp_reference_oracle(t.prior, oracle_cfg);
      break;
    }
  }
  return t;
}

// --- grids ---

const Observation& ObservationGrid::at(int index, int sigma) const {
  const auto pos = static_cast<size_t>(index) * static_cast<size_t>(n_sigma) + static_cast<size_t>(sigma);
  if (pos >= entries.size()) throw std::out_of_range("observation grid index out of range");
  return entries[pos];
}

std::vector<const Observation*> ObservationGrid::column(int sigma) const {
  std::vector<const Observation*> out;
  out.reserve(static_cast<size_t>(n_obs));
  for (int i = 0; i < n_obs; ++i) out.push_back(&at(i, sigma));
  return out;
}

ObservationGrid build_observation_grid(const Task& task, int n_obs, uint64_t master_seed) {
  if (n_obs < 1) throw std::invalid_argument("build_observation_grid: n_obs must be >= 1");
  ObservationGrid grid;
  grid.task_id = task.id;
  grid.n_obs = n_obs;
  grid.entries.reserve(static_cast<size_t>(n_obs) * 5);
  for (int i = 0; i < n_obs; ++i) {
    const uint64_t obs_seed =
        bench::derive_seed(master_seed, {std::string("grid"), task.id, static_cast<int64_t>(i)});
    core::Rng rng(obs_seed);
    std::vector<double> theta(static_cast<size_t>(task.theta_dim));
    task.prior.sample(rng, theta);
    const ad::Array aux = task.sample_aux(rng);
    const ad::Array raw = task.simulate(theta, bench::derive_seed(obs_seed, {std::string("sim")}));
    for (int sigma = 0; sigma < 5; ++sigma) {
      Observation obs;
      obs.index = i;
      obs.sigma = sigma;
      obs.theta_true = theta;
      obs.y_ref = task.transform(raw, sigma, aux);
      obs.y = task.summary(obs.y_ref);
      obs.seed_material = obs_seed;
      grid.entries.push_back(std::move(obs));
    }
  }
  return grid;
}

void write_grid_ndjson(const ObservationGrid& grid, std::ostream& os) {
  for (const auto& obs : grid.entries) {
    nlohmann::json rec;
    rec["task"] = grid.task_id;
    rec["index"] = obs.index;
    rec["sigma"] = obs.sigma;
    rec["theta_true"] = obs.theta_true;
    rec["y"] = std::vector<double>(obs.y.data(), obs.y.data() + obs.y.size());
    if (!obs.y_ref.same_shape(obs.y))
      rec["y_ref"] = std::vector<double>(obs.y_ref.data(), obs.y_ref.data() + obs.y_ref.size());
    rec["seed_material"] = obs.seed_material;
    os << rec.dump() << "\n";
  }
}

ObservationGrid read_grid_ndjson(std::istream& is) {
  ObservationGrid grid;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    Observation obs;
    grid.task_id = rec.at("task").get<std::string>();
    obs.index = rec.at("index").get<int>();
    obs.sigma = rec.at("sigma").get<int>();
    obs.theta_true = rec.at("theta_true").get<std::vector<double>>();
    obs.y = ad::Array::vec(rec.at("y").get<std::vector<double>>());
    obs.y_ref = rec.contains("y_ref") ? ad::Array::vec(rec.at("y_ref").get<std::vector<double>>()) : obs.y;
    obs.seed_material = rec.at("seed_material").get<uint64_t>();
    grid.entries.push_back(std::move(obs));
  }
  std::sort(grid.entries.begin(), grid.entries.end(), [](const Observation& a, const Observation& b) {
    return std::tie(a.index, a.sigma) < std::tie(b.index, b.sigma);
  });
  grid.n_obs = grid.entries.empty() ? 0 : grid.entries.back().index + 1;
  return grid;
}

core::Dataset make_training_set(const Task& task, int64_t n, uint64_t seed) {
  core::Dataset ds;
  ds.thetas = ad::Array({n, task.theta_dim});
  ds.xs = ad::Array({n, task.x_dim});
  core::Rng rng(bench::derive_seed(seed, {std::string("train-thetas")}));
  std::vector<double> theta(static_cast<size_t>(task.theta_dim));
  for (int64_t i = 0; i < n; ++i) {
    task.prior.sample(rng, theta);
    for (int j = 0; j < task.theta_dim; ++j) ds.thetas.at(i, j) = theta[static_cast<size_t>(j)];
    const ad::Array x =
        task.summary(task.simulate(theta, bench::derive_seed(seed, {std::string("train-sim"), i})));
    for (int j = 0; j < task.x_dim; ++j) ds.xs.at(i, j) = x[j];
  }
  return ds;
}

}  // namespace covbench::tasks
