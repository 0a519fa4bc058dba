#pragma once

#include <cstdint>
#include <vector>

#include "ad/graph.hpp"
#include "core/rng.hpp"
#include "estimators/mlp.hpp"
#include "estimators/spline.hpp"
#include "estimators/standardizer.hpp"
#include "optim/optimizer.hpp"

namespace covbench::est {

struct FlowConfig {
  int layers = 5;
  int bins = 8;
  double bound = 5.0;
  int hidden = 64;
  int hidden_layers = 2;
};

// Conditional coupling flow with rational-quadratic spline transforms.
// Conditioner output layers are zero-initialized, so a fresh flow is exactly
// the standard normal in standardized space.
class ConditionalFlow {
 public:
  ConditionalFlow(int target_dim, int context_dim, FlowConfig cfg, uint64_t init_seed);

  int target_dim() const { return d_; }
  int context_dim() const { return c_; }
  const FlowConfig& config() const { return cfg_; }

  optim::ParamStore& params() { return params_; }
  const optim::ParamStore& params() const { return params_; }

  Standardizer& target_standardizer() { return target_std_; }
  Standardizer& context_standardizer() { return context_std_; }
  const Standardizer& target_standardizer() const { return target_std_; }
  const Standardizer& context_standardizer() const { return context_std_; }

  // Graph node holding the sum over rows of log q(t|c) evaluated in
  // standardized coordinates (raw-space correction is a constant).
  ad::Value logprob_sum_graph(GraphParams& gp, const ad::Array& t_std, const ad::Array& c_std) const;

  // Per-row log q(target|context) in raw coordinates. `contexts` is either a
  // single row (shared) or one row per target.
  ad::Array logprob_rows(const ad::Array& targets, const ad::Array& contexts) const;

  // n draws given one raw context row.
  ad::Array sample(const ad::Array& context, int n, uint64_t seed) const;

  double raw_correction() const { return -target_std_.log_scale_sum(); }

  // Original-coordinate indices each layer transforms; the union over layers
  // must cover every coordinate.
  std::vector<std::vector<int>> transformed_indices_per_layer() const;

 private:
  struct Layer {
    Mlp conditioner;
    bool reversed = false;
    int n_id = 0, n_tr = 0;
  };

  ad::Array standardize_context(const ad::Array& contexts, int64_t n_rows) const;

  int d_, c_;
  FlowConfig cfg_;
  RqsSpline spline_;
  std::vector<Layer> layers_;
  optim::ParamStore params_;
  Standardizer target_std_, context_std_;
};

}  // namespace covbench::est
