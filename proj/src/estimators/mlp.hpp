#pragma once

#include <map>
#include <string>
#include <vector>

#include "ad/graph.hpp"
#include "core/rng.hpp"
#include "optim/optimizer.hpp"

namespace covbench::est {

// Caches one leaf node per parameter while a loss graph is being built, so
// shared parameters appear once in the graph.
struct GraphParams {
  const optim::ParamStore& store;
  std::map<std::string, ad::Value> leaves;

  explicit GraphParams(const optim::ParamStore& s) : store(s) {}
  ad::Value get(const std::string& name) {
    auto it = leaves.find(name);
    if (it != leaves.end()) return it->second;
    ad::Value v = ad::leaf(store.get(name), name);
    leaves.emplace(name, v);
    return v;
  }
};

enum class Activation { Relu, Tanh };

// Fully connected network; parameters live in an external ParamStore under
// the given name prefix.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string prefix, std::vector<int64_t> sizes, Activation act = Activation::Relu);

  // He-normal hidden weights; the output layer is scaled by last_scale
  // (0 gives an exactly zero output layer).
  void init_params(optim::ParamStore& store, core::Rng& rng, double last_scale = 1.0) const;

  ad::Value apply(GraphParams& gp, const ad::Value& input) const;

  // Plain evaluation against the current parameter values.
  ad::Array apply_plain(const optim::ParamStore& store, const ad::Array& input) const;

  int64_t in_dim() const { return sizes_.front(); }
  int64_t out_dim() const { return sizes_.back(); }
  const std::string& prefix() const { return prefix_; }

 private:
  std::string weight_name(size_t layer) const;
  std::string bias_name(size_t layer) const;

  std::string prefix_;
  std::vector<int64_t> sizes_;
  Activation act_ = Activation::Relu;
};

}  // namespace covbench::est
