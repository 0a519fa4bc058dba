#include "estimators/estimator.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bench/seeding.hpp"

namespace covbench::est {

namespace {

constexpr char kMagic[4] = {'C', 'B', 'E', '1'};

ad::Array gather_rows(const ad::Array& src, std::span<const int64_t> rows) {
  const int64_t d = src.cols();
  ad::Array out({static_cast<int64_t>(rows.size()), d});
  for (size_t i = 0; i < rows.size(); ++i)
    std::memcpy(out.data() + static_cast<int64_t>(i) * d, src.data() + rows[i] * d,
                static_cast<size_t>(d) * sizeof(double));
  return out;
}

void write_raw(std::ostream& os, const void* p, size_t n) { os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
void read_raw(std::istream& is, void* p, size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("estimator: truncated file");
}

template <typename T>
void write_pod(std::ostream& os, T v) { write_raw(os, &v, sizeof(T)); }
template <typename T>
T read_pod(std::istream& is) {
  T v;
  read_raw(is, &v, sizeof(T));
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod<uint64_t>(os, s.size());
  write_raw(os, s.data(), s.size());
}
std::string read_string(std::istream& is) {
  const auto n = read_pod<uint64_t>(is);
  std::string s(n, '\0');
  read_raw(is, s.data(), n);
  return s;
}

void write_vector(std::ostream& os, const std::vector<double>& v) {
  write_pod<uint64_t>(os, v.size());
  write_raw(os, v.data(), v.size() * sizeof(double));
}
std::vector<double> read_vector(std::istream& is) {
  const auto n = read_pod<uint64_t>(is);
  std::vector<double> v(n);
  read_raw(is, v.data(), n * sizeof(double));
  return v;
}

void write_standardizer(std::ostream& os, const Standardizer& s) {
  write_vector(os, s.shift);
  write_vector(os, s.scale);
}
Standardizer read_standardizer(std::istream& is) {
  Standardizer s;
  s.shift = read_vector(is);
  s.scale = read_vector(is);
  return s;
}

void write_params(std::ostream& os, const optim::ParamStore& store) {
  write_pod<uint64_t>(os, store.count());
  for (size_t i = 0; i < store.count(); ++i) {
    write_string(os, store.names()[i]);
    const ad::Array& a = store.value(i);
    write_pod<uint32_t>(os, static_cast<uint32_t>(a.rank()));
    for (int r = 0; r < a.rank(); ++r) write_pod<int64_t>(os, a.shape()[static_cast<size_t>(r)]);
    write_raw(os, a.data(), static_cast<size_t>(a.size()) * sizeof(double));
  }
}
void read_params(std::istream& is, optim::ParamStore& store) {
  const auto count = read_pod<uint64_t>(is);
  if (count != store.count()) throw std::runtime_error("estimator: parameter count mismatch");
  for (size_t i = 0; i < count; ++i) {
    const std::string name = read_string(is);
    if (name != store.names()[i]) throw std::runtime_error("estimator: parameter order mismatch at " + name);
    const auto rank = read_pod<uint32_t>(is);
    std::vector<int64_t> shape(rank);
    for (auto& d : shape) d = read_pod<int64_t>(is);
    ad::Array& a = store.value(i);
    if (shape != a.shape()) throw std::runtime_error("estimator: parameter shape mismatch at " + name);
    read_raw(is, a.data(), static_cast<size_t>(a.size()) * sizeof(double));
  }
}

}  // namespace

std::string kind_to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::NPE: return "npe";
    case EstimatorKind::NLE: return "nle";
    case EstimatorKind::NRE: return "nre";
  }
  return "?";
}

EstimatorKind kind_from_string(const std::string& s) {
  if (s == "npe") return EstimatorKind::NPE;
  if (s == "nle") return EstimatorKind::NLE;
  if (s == "nre") return EstimatorKind::NRE;
  throw std::invalid_argument("unknown estimator kind: " + s);
}

std::unique_ptr<Estimator> Estimator::make(EstimatorKind kind, int theta_dim, int x_dim,
                                           uint64_t init_seed, const FlowConfig& flow_cfg,
                                           const NreConfig& nre_cfg) {
  auto e = std::unique_ptr<Estimator>(new Estimator());
  e->kind_ = kind;
  e->theta_dim_ = theta_dim;
  e->x_dim_ = x_dim;
  e->flow_cfg_ = flow_cfg;
  e->nre_cfg_ = nre_cfg;
  switch (kind) {
    case EstimatorKind::NPE:
      e->flow_ = std::make_unique<ConditionalFlow>(theta_dim, x_dim, flow_cfg, init_seed);
      break;
    case EstimatorKind::NLE:
      e->flow_ = std::make_unique<ConditionalFlow>(x_dim, theta_dim, flow_cfg, init_seed);
      break;
    case EstimatorKind::NRE: {
      std::vector<int64_t> sizes;
      sizes.push_back(theta_dim + x_dim);
      for (int h = 0; h < nre_cfg.hidden_layers; ++h) sizes.push_back(nre_cfg.hidden);
      sizes.push_back(1);
      e->classifier_ = Mlp("nre", std::move(sizes), Activation::Relu);
      core::Rng rng(bench::derive_seed(init_seed, {std::string("nre-init")}));
      e->classifier_.init_params(e->clf_params_, rng, /*last_scale=*/0.1);
      e->theta_std_ = Standardizer::identity(theta_dim);
      e->x_std_ = Standardizer::identity(x_dim);
      break;
    }
  }
  return e;
}

void Estimator::fit_standardizers(const core::Dataset& data) {
  data.validate();
  const Standardizer th = Standardizer::fit(data.thetas);
  const Standardizer xs = Standardizer::fit(data.xs);
  switch (kind_) {
    case EstimatorKind::NPE:
      flow_->target_standardizer() = th;
      flow_->context_standardizer() = xs;
      break;
    case EstimatorKind::NLE:
      flow_->target_standardizer() = xs;
      flow_->context_standardizer() = th;
      break;
    case EstimatorKind::NRE:
      theta_std_ = th;
      x_std_ = xs;
      break;
  }
}

optim::ParamStore& Estimator::params() {
  return kind_ == EstimatorKind::NRE ? clf_params_ : flow_->params();
}

int64_t Estimator::nre_shift(int64_t batch_size, uint64_t seed) {
  // Cyclic shift in [1, m-1]; seeded so distinct batches pair differently.
  if (batch_size < 2) throw std::invalid_argument("nre loss: batch must hold at least 2 pairs");
  return 1 + static_cast<int64_t>(bench::mix64(seed) % static_cast<uint64_t>(batch_size - 1));
}

ad::Value Estimator::loss_graph(const core::Dataset& data, std::span<const int64_t> rows,
                                uint64_t batch_seed) {
  if (rows.empty()) throw std::invalid_argument("loss_graph: empty batch");
  const int64_t m = static_cast<int64_t>(rows.size());
  const ad::Array thetas = gather_rows(data.thetas, rows);
  const ad::Array xs = gather_rows(data.xs, rows);
  switch (kind_) {
    case EstimatorKind::NPE: {
      GraphParams gp(flow_->params());
      ad::Value ll = flow_->logprob_sum_graph(gp, flow_->target_standardizer().apply_rows(thetas),
                                              flow_->context_standardizer().apply_rows(xs));
      return ad::add_const(ad::scale(ll, -1.0 / static_cast<double>(m)), -flow_->raw_correction());
    }
    case EstimatorKind::NLE: {
      GraphParams gp(flow_->params());
      ad::Value ll = flow_->logprob_sum_graph(gp, flow_->target_standardizer().apply_rows(xs),
                                              flow_->context_standardizer().apply_rows(thetas));
      return ad::add_const(ad::scale(ll, -1.0 / static_cast<double>(m)), -flow_->raw_correction());
    }
    case EstimatorKind::NRE: {
      const int64_t shift = nre_shift(m, batch_seed);
      const ad::Array th_std = theta_std_.apply_rows(thetas);
      const ad::Array x_std = x_std_.apply_rows(xs);
      ad::Array joint({m, theta_dim_ + x_dim_});
      ad::Array marginal({m, theta_dim_ + x_dim_});
      for (int64_t i = 0; i < m; ++i) {
        const int64_t ishift = (i + shift) % m;
        for (int j = 0; j < theta_dim_; ++j) {
          joint.at(i, j) = th_std.at(i, j);
          marginal.at(i, j) = th_std.at(ishift, j);
        }
        for (int j = 0; j < x_dim_; ++j) {
          joint.at(i, theta_dim_ + j) = x_std.at(i, j);
          marginal.at(i, theta_dim_ + j) = x_std.at(i, j);
        }
      }
      GraphParams gp(clf_params_);
      ad::Value logit_pos = classifier_.apply(gp, ad::constant(joint));
      ad::Value logit_neg = classifier_.apply(gp, ad::constant(marginal));
      // mean over the 2m classifications of -log sigmoid(+-logit)
      ad::Value loss_pos = ad::sum(ad::softplus(ad::scale(logit_pos, -1.0)));
      ad::Value loss_neg = ad::sum(ad::softplus(logit_neg));
      return ad::scale(ad::add(loss_pos, loss_neg), 0.5 / static_cast<double>(m));
    }
  }
  throw std::logic_error("unreachable");
}

ad::Array Estimator::posterior_logprob_rows(const ad::Array& thetas, const ad::Array& x) const {
  if (kind_ != EstimatorKind::NPE) throw std::logic_error("posterior_logprob_rows: NPE only");
  return flow_->logprob_rows(thetas, x);
}

ad::Array Estimator::posterior_sample(const ad::Array& x, int n, uint64_t seed) const {
  if (kind_ != EstimatorKind::NPE) throw std::logic_error("posterior_sample: NPE only");
  return flow_->sample(x, n, seed);
}

ad::Array Estimator::likelihood_logprob_rows(const ad::Array& x, const ad::Array& thetas) const {
  if (kind_ != EstimatorKind::NLE) throw std::logic_error("likelihood_logprob_rows: NLE only");
  const int64_t n = thetas.rank() == 2 ? thetas.rows() : 1;
  ad::Array targets({n, x_dim_});
  for (int64_t i = 0; i < n; ++i)
    for (int j = 0; j < x_dim_; ++j) targets.at(i, j) = x[j];
  return flow_->logprob_rows(targets, thetas);
}

ad::Array Estimator::logit_rows(const ad::Array& thetas, const ad::Array& x) const {
  if (kind_ != EstimatorKind::NRE) throw std::logic_error("logit_rows: NRE only");
  const int64_t n = thetas.rank() == 2 ? thetas.rows() : 1;
  const double* tp = thetas.data();
  ad::Array in({n, theta_dim_ + x_dim_});
  for (int64_t i = 0; i < n; ++i) {
    for (int j = 0; j < theta_dim_; ++j)
      in.at(i, j) = (tp[i * theta_dim_ + j] - theta_std_.shift[static_cast<size_t>(j)]) /
                    theta_std_.scale[static_cast<size_t>(j)];
    for (int j = 0; j < x_dim_; ++j)
      in.at(i, theta_dim_ + j) =
          (x[j] - x_std_.shift[static_cast<size_t>(j)]) / x_std_.scale[static_cast<size_t>(j)];
  }
  ad::Array out = classifier_.apply_plain(clf_params_, in);
  ad::Array logits({n});
  for (int64_t i = 0; i < n; ++i) logits[i] = out.at(i, 0);
  return logits;
}

const ConditionalFlow& Estimator::flow() const {
  if (!flow_) throw std::logic_error("estimator has no flow");
  return *flow_;
}
ConditionalFlow& Estimator::flow() {
  if (!flow_) throw std::logic_error("estimator has no flow");
  return *flow_;
}

void Estimator::save(std::ostream& os) const {
  write_raw(os, kMagic, 4);
  write_pod<uint32_t>(os, 1);  // version
  write_string(os, kind_to_string(kind_));
  write_pod<int32_t>(os, theta_dim_);
  write_pod<int32_t>(os, x_dim_);
  write_pod<int32_t>(os, flow_cfg_.layers);
  write_pod<int32_t>(os, flow_cfg_.bins);
  write_pod<double>(os, flow_cfg_.bound);
  write_pod<int32_t>(os, flow_cfg_.hidden);
  write_pod<int32_t>(os, flow_cfg_.hidden_layers);
  write_pod<int32_t>(os, nre_cfg_.hidden);
  write_pod<int32_t>(os, nre_cfg_.hidden_layers);
  if (kind_ == EstimatorKind::NRE) {
    write_standardizer(os, theta_std_);
    write_standardizer(os, x_std_);
    write_params(os, clf_params_);
  } else {
    write_standardizer(os, flow_->target_standardizer());
    write_standardizer(os, flow_->context_standardizer());
    write_params(os, flow_->params());
  }
}

std::unique_ptr<Estimator> Estimator::load(std::istream& is) {
  char magic[4];
  read_raw(is, magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("estimator: bad magic");
  const auto version = read_pod<uint32_t>(is);
  if (version != 1) throw std::runtime_error("estimator: unsupported version " + std::to_string(version));
  const EstimatorKind kind = kind_from_string(read_string(is));
  const auto theta_dim = read_pod<int32_t>(is);
  const auto x_dim = read_pod<int32_t>(is);
  FlowConfig fc;
  fc.layers = read_pod<int32_t>(is);
  fc.bins = read_pod<int32_t>(is);
  fc.bound = read_pod<double>(is);
  fc.hidden = read_pod<int32_t>(is);
  fc.hidden_layers = read_pod<int32_t>(is);
  NreConfig nc;
  nc.hidden = read_pod<int32_t>(is);
  nc.hidden_layers = read_pod<int32_t>(is);
  auto e = make(kind, theta_dim, x_dim, /*init_seed=*/0, fc, nc);
  if (kind == EstimatorKind::NRE) {
    e->theta_std_ = read_standardizer(is);
    e->x_std_ = read_standardizer(is);
    read_params(is, e->clf_params_);
  } else {
    e->flow_->target_standardizer() = read_standardizer(is);
    e->flow_->context_standardizer() = read_standardizer(is);
    read_params(is, e->flow_->params());
  }
  return e;
}

void Estimator::save_file(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  save(os);
}

std::unique_ptr<Estimator> Estimator::load_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  return load(is);
}

namespace {

std::vector<int64_t> all_rows(const core::Dataset& d) {
  std::vector<int64_t> rows(static_cast<size_t>(d.n()));
  for (size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int64_t>(i);
  return rows;
}

}  // namespace

double npe_loss(Estimator& e, const core::Dataset& batch) {
  return e.loss_graph(batch, all_rows(batch), 0)->value.item();
}
double nle_loss(Estimator& e, const core::Dataset& batch) {
  return e.loss_graph(batch, all_rows(batch), 0)->value.item();
}
double nre_loss(Estimator& e, const core::Dataset& batch, uint64_t seed) {
  return e.loss_graph(batch, all_rows(batch), seed)->value.item();
}

}  // namespace covbench::est
