#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ad/array.hpp"

namespace covbench::optim {

using GradMap = std::map<std::string, ad::Array>;

// Ordered named parameter set. Order is fixed at insertion and defines the
// serialization and update order.
class ParamStore {
 public:
  void add(std::string name, ad::Array value);
  ad::Array& get(const std::string& name);
  const ad::Array& get(const std::string& name) const;
  bool has(const std::string& name) const;

  size_t count() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  ad::Array& value(size_t i) { return values_[i]; }
  const ad::Array& value(size_t i) const { return values_[i]; }

  int64_t total_size() const;

  ParamStore snapshot() const { return *this; }
  void restore(const ParamStore& snap);

 private:
  std::vector<std::string> names_;
  std::vector<ad::Array> values_;
  std::map<std::string, size_t> index_;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW: bias-corrected adaptive update with decoupled weight decay applied
// multiplicatively before the adaptive step.
class AdamW {
 public:
  explicit AdamW(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamStore& params, const GradMap& grads);

  int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  int64_t step_count_ = 0;
  std::map<std::string, ad::Array> m_, v_;
};

// Aborts reported by the optimizer and training loop: divergence, non-finite
// gradients and similar unrecoverable states.
struct TrainAbort : std::runtime_error {
  explicit TrainAbort(const std::string& what) : std::runtime_error(what) {}
};

double global_grad_norm(const GradMap& grads);

// Two-step sharpness-aware update: perturb parameters by rho along the
// normalized gradient, re-evaluate the gradient there, apply AdamW with the
// second gradient at the original point. Zero first gradient falls back to a
// plain AdamW step.
void sam_step(ParamStore& params, const std::function<GradMap(const ParamStore&)>& grad_fn,
              AdamW& opt, double rho, const GradMap& first_grads);

}  // namespace covbench::optim
