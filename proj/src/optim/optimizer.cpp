#include "optim/optimizer.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace covbench::optim {

void ParamStore::add(std::string name, ad::Array value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  index_[name] = names_.size();
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

ad::Array& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return values_[it->second];
}

const ad::Array& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return values_[it->second];
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) != 0; }

int64_t ParamStore::total_size() const {
  int64_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

void ParamStore::restore(const ParamStore& snap) {
  if (snap.names_ != names_) throw std::invalid_argument("restore: parameter sets differ");
  values_ = snap.values_;
}

void AdamW::step(ParamStore& params, const GradMap& grads) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (size_t pi = 0; pi < params.count(); ++pi) {
    const std::string& name = params.names()[pi];
    auto git = grads.find(name);
    if (git == grads.end()) continue;  // parameter unused by this loss
    const ad::Array& g = git->second;
    ad::Array& w = params.value(pi);
    if (!g.same_shape(w))
      throw std::invalid_argument("adamw: gradient shape " + g.shape_str() + " does not match parameter " +
                                  name + " " + w.shape_str());
    for (int64_t i = 0; i < g.size(); ++i)
      if (!std::isfinite(g[i]))
        throw TrainAbort("adamw: non-finite gradient for parameter " + name);

    auto& m = m_.try_emplace(name, ad::Array::zeros(w.shape())).first->second;
    auto& v = v_.try_emplace(name, ad::Array::zeros(w.shape())).first->second;
    const double decay = 1.0 - cfg_.lr * cfg_.weight_decay;
    for (int64_t i = 0; i < w.size(); ++i) {
      w[i] *= decay;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

double global_grad_norm(const GradMap& grads) {
  double acc = 0.0;
  for (const auto& [name, g] : grads)
    for (int64_t i = 0; i < g.size(); ++i) acc += g[i] * g[i];
  return std::sqrt(acc);
}

void sam_step(ParamStore& params, const std::function<GradMap(const ParamStore&)>& grad_fn,
              AdamW& opt, double rho, const GradMap& first_grads) {
  if (!(rho > 0.0)) throw std::invalid_argument("sam_step: rho must be positive");
  const double norm = global_grad_norm(first_grads);
  if (norm == 0.0) {
    opt.step(params, first_grads);
    return;
  }
  const double scale = rho / norm;
  ParamStore original = params.snapshot();
  for (size_t pi = 0; pi < params.count(); ++pi) {
    const std::string& name = params.names()[pi];
    auto it = first_grads.find(name);
    if (it == first_grads.end()) continue;
    ad::Array& w = params.value(pi);
    const ad::Array& g = it->second;
    for (int64_t i = 0; i < w.size(); ++i) w[i] += scale * g[i];
  }
  GradMap second = grad_fn(params);
  params.restore(original);
  opt.step(params, second);
}

}  // namespace covbench::optim
