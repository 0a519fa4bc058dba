#include "estimators/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace covbench::est {

Mlp::Mlp(std::string prefix, std::vector<int64_t> sizes, Activation act)
    : prefix_(std::move(prefix)), sizes_(std::move(sizes)), act_(act) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
}

std::string Mlp::weight_name(size_t layer) const { return prefix_ + ".w" + std::to_string(layer); }
std::string Mlp::bias_name(size_t layer) const { return prefix_ + ".b" + std::to_string(layer); }

void Mlp::init_params(optim::ParamStore& store, core::Rng& rng, double last_scale) const {
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int64_t fan_in = sizes_[l];
    const int64_t fan_out = sizes_[l + 1];
    const bool last = l + 2 == sizes_.size();
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in)) * (last ? last_scale : 1.0);
    ad::Array w({fan_in, fan_out});
    for (int64_t i = 0; i < w.size(); ++i) w[i] = sd == 0.0 ? 0.0 : sd * rng.normal();
    store.add(weight_name(l), std::move(w));
    store.add(bias_name(l), ad::Array::zeros({fan_out}));
  }
}

ad::Value Mlp::apply(GraphParams& gp, const ad::Value& input) const {
  ad::Value h = input;
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    h = ad::affine(h, gp.get(weight_name(l)), gp.get(bias_name(l)));
    const bool last = l + 2 == sizes_.size();
    if (!last) h = act_ == Activation::Relu ? ad::relu(h) : ad::tanh_op(h);
  }
  return h;
}

ad::Array Mlp::apply_plain(const optim::ParamStore& store, const ad::Array& input) const {
  if (input.rank() != 2 || input.cols() != sizes_.front())
    throw std::invalid_argument("Mlp: input shape " + input.shape_str() + " does not match in_dim " +
                                std::to_string(sizes_.front()));
  ad::Array h = input;
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const ad::Array& w = store.get(weight_name(l));
    const ad::Array& b = store.get(bias_name(l));
    const int64_t m = h.rows(), k = h.cols(), n = w.cols();
    ad::Array out({m, n});
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t j = 0; j < n; ++j) out.at(i, j) = b[j];
      for (int64_t p = 0; p < k; ++p) {
        const double hv = h.at(i, p);
        if (hv == 0.0) continue;
        for (int64_t j = 0; j < n; ++j) out.at(i, j) += hv * w.at(p, j);
      }
    }
    const bool last = l + 2 == sizes_.size();
    if (!last) {
      for (int64_t i = 0; i < out.size(); ++i)
        out[i] = act_ == Activation::Relu ? (out[i] > 0.0 ? out[i] : 0.0) : std::tanh(out[i]);
    }
    h = std::move(out);
  }
  return h;
}

}  // namespace covbench::est
