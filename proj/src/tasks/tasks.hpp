#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ad/array.hpp"
#include "core/dataset.hpp"
#include "core/rng.hpp"
#include "inference/mcmc.hpp"
#include "tasks/distributions.hpp"

namespace covbench::tasks {

enum class TaskName { TG, TG_SS, SV, SV_SS, SLCP };

TaskName task_from_string(const std::string& id);
std::string task_to_string(TaskName name);

// Raised when a reference oracle fails its convergence diagnostics.
struct OracleError : std::runtime_error {
  OracleError(const std::string& what, inference::McmcDiag d)
      : std::runtime_error(what), diag(std::move(d)) {}
  inference::McmcDiag diag;
};

struct ReferenceOracle {
  enum class Kind { ConjugateClosedForm, Mcmc } kind = Kind::ConjugateClosedForm;
  // Draw n posterior samples given the reference-facing observation.
  std::function<ad::Array(const ad::Array& y_ref, int n, uint64_t seed)> sample;
  // Exact log-density, available for the conjugate kind only.
  std::function<double(std::span<const double> theta, const ad::Array& y_ref)> logpdf;
};

struct McmcOracleConfig {
  int chains = 4;
  int keep_per_chain = 1500;
  double rhat_threshold = 1.05;
};

// One benchmark problem: prior, simulator, optional summary map, the
// misspecification-transform family and a reference-posterior oracle.
struct Task {
  TaskName name = TaskName::TG;
  std::string id;
  int theta_dim = 0;
  int raw_dim = 0;  // simulator output length before summaries
  int x_dim = 0;    // estimator-facing dimension (post-summary)
  bool has_summary = false;
  int aux_dim = 0;  // length of the per-observation auxiliary noise draw

  Prior prior;
  std::function<ad::Array(std::span<const double> theta, uint64_t seed)> simulate;
  std::function<ad::Array(const ad::Array& raw)> summary;  // identity when !has_summary
  std::function<ad::Array(core::Rng&)> sample_aux;
  // T_sigma; sigma=0 returns the input unchanged, bit for bit.
  std::function<ad::Array(const ad::Array& raw, int sigma, const ad::Array& aux)> transform;
  ReferenceOracle reference;

  ad::Array observe(const ad::Array& raw, int sigma, const ad::Array& aux) const {
    return summary(transform(raw, sigma, aux));
  }
};

Task make_task(TaskName name, const McmcOracleConfig& oracle_cfg = {});

// --- individual pieces, exposed for direct testing ---

ad::Array tg_simulate(double theta, uint64_t seed);
ad::Array tg_summary(const ad::Array& x);
ad::Array tg_transform(const ad::Array& x, int sigma, const ad::Array& z);
// Conjugate N(mu_n, tau_n^2) for n_data unit-variance observations with mean
// ybar under the N(0, 5^2) prior; n_data=0 returns the prior.
void tg_conjugate(double ybar, int n_data, double* mu_n, double* var_n);

ad::Array sv_simulate(std::span<const double> theta, uint64_t seed);
ad::Array sv_summary(const ad::Array& x);
ad::Array sv_transform(const ad::Array& x, int sigma);
double sv_log_joint(std::span<const double> state, const ad::Array& y);  // state = (log tau, log nu, s0..s100)

ad::Array slcp_simulate(std::span<const double> theta, uint64_t seed);
ad::Array slcp_transform(const ad::Array& x, int sigma, const ad::Array& z);
double slcp_loglik(std::span<const double> theta, const ad::Array& y);

// --- observation grids ---

struct Observation {
  int index = 0;
  int sigma = 0;
  std::vector<double> theta_true;
  ad::Array y;      // estimator-facing (summaries applied)
  ad::Array y_ref;  // reference-facing (pre-summary, post-transform)
  uint64_t seed_material = 0;
};

struct ObservationGrid {
  std::string task_id;
  int n_obs = 0;
  int n_sigma = 5;
  std::vector<Observation> entries;  // ordered by (index, sigma)

  const Observation& at(int index, int sigma) const;
  std::vector<const Observation*> column(int sigma) const;
};

ObservationGrid build_observation_grid(const Task& task, int n_obs, uint64_t master_seed);

void write_grid_ndjson(const ObservationGrid& grid, std::ostream& os);
ObservationGrid read_grid_ndjson(std::istream& is);

// n prior-predictive pairs with summaries applied.
core::Dataset make_training_set(const Task& task, int64_t n, uint64_t seed);

}  // namespace covbench::tasks
