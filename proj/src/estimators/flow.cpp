#include "estimators/flow.hpp"

#include <cmath>
#include <stdexcept>

#include "bench/seeding.hpp"

namespace covbench::est {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

ad::Array reverse_cols(const ad::Array& x) {
  ad::Array out = x;
  const int64_t d = x.cols();
  for (int64_t i = 0; i < x.rows(); ++i)
    for (int64_t j = 0; j < d; ++j) out.at(i, j) = x.at(i, d - 1 - j);
  return out;
}

ad::Array reverse_matrix(int64_t d) {
  ad::Array p({d, d});
  for (int64_t j = 0; j < d; ++j) p.at(d - 1 - j, j) = 1.0;
  return p;
}

// Spline coupling node: inputs B (m x t) and raw parameters (m x t*pc);
// output is (m x 2t) holding transformed values and per-element log-derivs.
ad::Value spline_node(RqsSpline sp, const ad::Value& b, const ad::Value& raw) {
  const int64_t m = b->value.rows();
  const int64_t t = b->value.cols();
  const int64_t pc = sp.param_count();
  if (raw->value.rows() != m || raw->value.cols() != t * pc)
    throw std::invalid_argument("spline_node: parameter block shape mismatch");
  ad::Array out({m, 2 * t});
  for (int64_t i = 0; i < m; ++i) {
    const double* raw_row = raw->value.data() + i * t * pc;
    for (int64_t j = 0; j < t; ++j) {
      const auto g = sp.decode({raw_row + j * pc, static_cast<size_t>(pc)});
      double v, ld;
      sp.forward(b->value.at(i, j), g, &v, &ld);
      out.at(i, j) = v;
      out.at(i, t + j) = ld;
    }
  }
  return ad::custom(std::move(out), {b, raw}, [sp, m, t, pc](ad::Node& self) {
    ad::Node& pb = *self.parents[0];
    ad::Node& praw = *self.parents[1];
    ad::Array gb({m, t});
    ad::Array graw({m, t * pc});
    for (int64_t i = 0; i < m; ++i) {
      const double* raw_row = praw.value.data() + i * t * pc;
      double* graw_row = graw.data() + i * t * pc;
      for (int64_t j = 0; j < t; ++j) {
        const auto g = sp.decode({raw_row + j * pc, static_cast<size_t>(pc)});
        double gu = 0.0;
        sp.backward(pb.value.at(i, j), g, self.adjoint.at(i, j), self.adjoint.at(i, t + j), &gu,
                    {graw_row + j * pc, static_cast<size_t>(pc)});
        gb.at(i, j) = gu;
      }
    }
    if (pb.requires_grad) pb.accumulate(gb);
    if (praw.requires_grad) praw.accumulate(graw);
  });
}

}  // namespace

ConditionalFlow::ConditionalFlow(int target_dim, int context_dim, FlowConfig cfg, uint64_t init_seed)
    : d_(target_dim), c_(context_dim), cfg_(cfg), spline_(cfg.bins, cfg.bound) {
  if (d_ < 1 || c_ < 1) throw std::invalid_argument("ConditionalFlow: dimensions must be >= 1");
  target_std_ = Standardizer::identity(d_);
  context_std_ = Standardizer::identity(c_);
  core::Rng rng(bench::derive_seed(init_seed, {std::string("flow-init")}));
  for (int l = 0; l < cfg_.layers; ++l) {
    Layer layer;
    layer.reversed = d_ > 1 && (l % 2 == 1);
    layer.n_id = d_ / 2;
    layer.n_tr = d_ - layer.n_id;
    std::vector<int64_t> sizes;
    sizes.push_back(layer.n_id + c_);
    for (int h = 0; h < cfg_.hidden_layers; ++h) sizes.push_back(cfg_.hidden);
    sizes.push_back(static_cast<int64_t>(layer.n_tr) * spline_.param_count());
    layer.conditioner = Mlp("flow.l" + std::to_string(l), std::move(sizes), Activation::Relu);
    layer.conditioner.init_params(params_, rng, /*last_scale=*/0.0);
    layers_.push_back(std::move(layer));
  }
}

std::vector<std::vector<int>> ConditionalFlow::transformed_indices_per_layer() const {
  std::vector<std::vector<int>> out;
  for (const auto& layer : layers_) {
    std::vector<int> idx;
    for (int p = layer.n_id; p < d_; ++p) idx.push_back(layer.reversed ? d_ - 1 - p : p);
    out.push_back(std::move(idx));
  }
  return out;
}

ad::Value ConditionalFlow::logprob_sum_graph(GraphParams& gp, const ad::Array& t_std,
                                             const ad::Array& c_std) const {
  if (t_std.rank() != 2 || t_std.cols() != d_ || c_std.rank() != 2 || c_std.cols() != c_ ||
      c_std.rows() != t_std.rows())
    throw std::invalid_argument("flow: standardized batch shapes do not match flow dimensions");
  const int64_t m = t_std.rows();
  ad::Value z = ad::constant(t_std);
  ad::Value context = ad::constant(c_std);
  ad::Value logdet;
  for (const auto& layer : layers_) {
    ad::Value zp = layer.reversed ? ad::matmul(z, ad::constant(reverse_matrix(d_))) : z;
    ad::Value id_part, cond_in;
    if (layer.n_id > 0) {
      id_part = ad::slice(zp, 1, 0, layer.n_id);
      cond_in = ad::concat(id_part, context, 1);
    } else {
      cond_in = context;
    }
    ad::Value b = ad::slice(zp, 1, layer.n_id, layer.n_tr);
    ad::Value raw = layer.conditioner.apply(gp, cond_in);
    ad::Value s = spline_node(spline_, b, raw);
    ad::Value v = ad::slice(s, 1, 0, layer.n_tr);
    ad::Value ld = ad::sum(ad::slice(s, 1, layer.n_tr, layer.n_tr));
    logdet = logdet ? ad::add(logdet, ld) : ld;
    z = layer.n_id > 0 ? ad::concat(id_part, v, 1) : v;
  }
  // sum over rows of log N(z) + logdet
  ad::Value sq = ad::sum(ad::mul(z, z));
  ad::Value base = ad::add_const(ad::scale(sq, -0.5), -0.5 * kLogTwoPi * static_cast<double>(m * d_));
  return ad::add(base, logdet);
}

ad::Array ConditionalFlow::standardize_context(const ad::Array& contexts, int64_t n_rows) const {
  ad::Array c_rows;
  if (contexts.rank() == 1) {
    if (contexts.size() != c_) throw std::invalid_argument("flow: context dimension mismatch");
    c_rows = ad::Array({n_rows, c_});
    for (int64_t i = 0; i < n_rows; ++i)
      for (int64_t j = 0; j < c_; ++j) c_rows.at(i, j) = contexts[j];
  } else {
    if (contexts.cols() != c_) throw std::invalid_argument("flow: context dimension mismatch");
    if (contexts.rows() == n_rows) {
      c_rows = contexts;
    } else if (contexts.rows() == 1) {
      c_rows = ad::Array({n_rows, c_});
      for (int64_t i = 0; i < n_rows; ++i)
        for (int64_t j = 0; j < c_; ++j) c_rows.at(i, j) = contexts.at(0, j);
    } else {
      throw std::invalid_argument("flow: context rows must be 1 or match target rows");
    }
  }
  return context_std_.apply_rows(c_rows);
}

ad::Array ConditionalFlow::logprob_rows(const ad::Array& targets, const ad::Array& contexts) const {
  ad::Array t_rows = targets.rank() == 1 ? ad::Array({1, d_}, std::vector<double>(targets.data(), targets.data() + targets.size()))
                                         : targets;
  if (t_rows.cols() != d_) throw std::invalid_argument("flow: target dimension mismatch");
  const int64_t n = t_rows.rows();
  ad::Array z = target_std_.apply_rows(t_rows);
  ad::Array c = standardize_context(contexts, n);

  ad::Array logdet({n});
  for (const auto& layer : layers_) {
    if (layer.reversed) z = reverse_cols(z);
    ad::Array cond_in({n, layer.n_id + c_});
    for (int64_t i = 0; i < n; ++i) {
      for (int j = 0; j < layer.n_id; ++j) cond_in.at(i, j) = z.at(i, j);
      for (int j = 0; j < c_; ++j) cond_in.at(i, layer.n_id + j) = c.at(i, j);
    }
    const ad::Array raw = layer.conditioner.apply_plain(params_, cond_in);
    const int pc = spline_.param_count();
    for (int64_t i = 0; i < n; ++i) {
      const double* raw_row = raw.data() + i * raw.cols();
      for (int j = 0; j < layer.n_tr; ++j) {
        const auto g = spline_.decode({raw_row + j * pc, static_cast<size_t>(pc)});
        double v, ld;
        spline_.forward(z.at(i, layer.n_id + j), g, &v, &ld);
        z.at(i, layer.n_id + j) = v;
        logdet[i] += ld;
      }
    }
  }
  ad::Array out({n});
  const double corr = raw_correction();
  for (int64_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (int64_t j = 0; j < d_; ++j) sq += z.at(i, j) * z.at(i, j);
    out[i] = -0.5 * (kLogTwoPi * d_ + sq) + logdet[i] + corr;
  }
  return out;
}

ad::Array ConditionalFlow::sample(const ad::Array& context, int n, uint64_t seed) const {
  ad::Array z({n, d_});
  if (n == 0) return target_std_.invert_rows(z);
  core::Rng rng(seed);
  for (int64_t i = 0; i < z.size(); ++i) z[i] = rng.normal();
  ad::Array c = standardize_context(context, n);

  const int pc = spline_.param_count();
  for (auto layer_it = layers_.rbegin(); layer_it != layers_.rend(); ++layer_it) {
    const auto& layer = *layer_it;
    ad::Array cond_in({static_cast<int64_t>(n), layer.n_id + c_});
    for (int64_t i = 0; i < n; ++i) {
      for (int j = 0; j < layer.n_id; ++j) cond_in.at(i, j) = z.at(i, j);
      for (int j = 0; j < c_; ++j) cond_in.at(i, layer.n_id + j) = c.at(i, j);
    }
    const ad::Array raw = layer.conditioner.apply_plain(params_, cond_in);
    for (int64_t i = 0; i < n; ++i) {
      const double* raw_row = raw.data() + i * raw.cols();
      for (int j = 0; j < layer.n_tr; ++j) {
        const auto g = spline_.decode({raw_row + j * pc, static_cast<size_t>(pc)});
        z.at(i, layer.n_id + j) = spline_.inverse(z.at(i, layer.n_id + j), g);
      }
    }
    if (layer.reversed) z = reverse_cols(z);
  }
  return target_std_.invert_rows(z);
}

}  // namespace covbench::est
