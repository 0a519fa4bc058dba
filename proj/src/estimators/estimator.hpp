#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "core/dataset.hpp"
#include "estimators/flow.hpp"
#include "estimators/mlp.hpp"
#include "estimators/standardizer.hpp"
#include "optim/train.hpp"

namespace covbench::est {

enum class EstimatorKind { NPE, NLE, NRE };

std::string kind_to_string(EstimatorKind k);
EstimatorKind kind_from_string(const std::string& s);

struct NreConfig {
  int hidden = 64;
  int hidden_layers = 3;
};

// One trainable density/ratio estimator plus its frozen standardizers.
// NPE: flow over theta given x. NLE: flow over x given theta. NRE: classifier
// logit over (theta, x).
class Estimator : public optim::TrainableModel {
 public:
  static std::unique_ptr<Estimator> make(EstimatorKind kind, int theta_dim, int x_dim, uint64_t init_seed,
                                         const FlowConfig& flow_cfg = {}, const NreConfig& nre_cfg = {});

  EstimatorKind kind() const { return kind_; }
  int theta_dim() const { return theta_dim_; }
  int x_dim() const { return x_dim_; }

  // Fits theta/x standardizers on the training set; must run before train().
  void fit_standardizers(const core::Dataset& data);

  optim::ParamStore& params() override;
  ad::Value loss_graph(const core::Dataset& data, std::span<const int64_t> rows,
                       uint64_t batch_seed) override;

  // NPE surfaces
  ad::Array posterior_logprob_rows(const ad::Array& thetas, const ad::Array& x) const;
  ad::Array posterior_sample(const ad::Array& x, int n, uint64_t seed) const;
  // NLE surface: log q(x | theta), one row per theta
  ad::Array likelihood_logprob_rows(const ad::Array& x, const ad::Array& thetas) const;
  // NRE surface: classifier logits, one row per theta
  ad::Array logit_rows(const ad::Array& thetas, const ad::Array& x) const;

  const ConditionalFlow& flow() const;
  ConditionalFlow& flow();

  void save(std::ostream& os) const;
  static std::unique_ptr<Estimator> load(std::istream& is);
  void save_file(const std::string& path) const;
  static std::unique_ptr<Estimator> load_file(const std::string& path);

  // Exposed for loss unit tests: contrastive batch assembly offset.
  static int64_t nre_shift(int64_t batch_size, uint64_t seed);

 private:
  Estimator() = default;

  EstimatorKind kind_ = EstimatorKind::NPE;
  int theta_dim_ = 0, x_dim_ = 0;
  FlowConfig flow_cfg_;
  NreConfig nre_cfg_;

  std::unique_ptr<ConditionalFlow> flow_;  // NPE / NLE
  // NRE pieces
  Mlp classifier_;
  optim::ParamStore clf_params_;
  Standardizer theta_std_, x_std_;  // NRE standardizers (flows own theirs)
};

// Loss values on a batch, exposed for tests; these mirror the internal
// training graphs.
double npe_loss(Estimator& e, const core::Dataset& batch);
double nle_loss(Estimator& e, const core::Dataset& batch);
double nre_loss(Estimator& e, const core::Dataset& batch, uint64_t seed);

}  // namespace covbench::est
