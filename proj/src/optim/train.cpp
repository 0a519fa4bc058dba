#include "optim/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bench/seeding.hpp"
#include "core/rng.hpp"

namespace covbench::optim {

namespace {

// Chunked evaluation keeps graph memory bounded on large validation splits.
double evaluate_loss(TrainableModel& model, const core::Dataset& data, std::span<const int64_t> rows,
                     uint64_t seed) {
  constexpr int64_t kChunk = 1024;
  const int64_t n = static_cast<int64_t>(rows.size());
  double acc = 0.0;
  for (int64_t start = 0; start < n; start += kChunk) {
    const int64_t len = std::min(kChunk, n - start);
    ad::Value loss = model.loss_graph(data, rows.subspan(static_cast<size_t>(start), static_cast<size_t>(len)), seed);
    acc += loss->value.item() * static_cast<double>(len);
  }
  return acc / static_cast<double>(n);
}

}  // namespace

TrainLog train(TrainableModel& model, const core::Dataset& data, const TrainConfig& cfg) {
  data.validate();
  const int64_t n = data.n();
  if (n == 0) throw std::invalid_argument("train: empty dataset");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (cfg.patience < 1) throw std::invalid_argument("train: patience must be >= 1");
  if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0))
    throw std::invalid_argument("train: validation fraction must lie in (0,1)");
  if (static_cast<double>(n) < 10.0 / cfg.validation_fraction)
    throw std::invalid_argument("train: dataset too small for validation fraction " +
                                std::to_string(cfg.validation_fraction));

  std::vector<int64_t> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  core::Rng split_rng(bench::derive_seed(cfg.seed, {std::string("split")}));
  split_rng.shuffle(perm.begin(), perm.end());
  const int64_t n_val = std::max<int64_t>(1, static_cast<int64_t>(std::llround(cfg.validation_fraction * static_cast<double>(n))));
  std::vector<int64_t> val_rows(perm.begin(), perm.begin() + n_val);
  std::vector<int64_t> train_rows(perm.begin() + n_val, perm.end());

  AdamW opt(cfg.adam);
  TrainLog log;
  log.best_val_loss = evaluate_loss(model, data, val_rows, 0);
  log.best_epoch = 0;
  ParamStore best = model.params().snapshot();
  int stale = 0;

  auto grads_of_batch = [&](std::span<const int64_t> rows, uint64_t batch_seed, double* loss_out) {
    ad::Value loss = model.loss_graph(data, rows, batch_seed);
    const double lv = loss->value.item();
    if (loss_out) *loss_out = lv;
    return ad::backward(loss);
  };

  for (int epoch = 1;; ++epoch) {
    if (cfg.max_epochs && epoch > *cfg.max_epochs) break;

    core::Rng epoch_rng(bench::derive_seed(cfg.seed, {std::string("epoch"), static_cast<int64_t>(epoch)}));
    epoch_rng.shuffle(train_rows.begin(), train_rows.end());

    double epoch_loss = 0.0;
    int64_t seen = 0;
    const int64_t n_train = static_cast<int64_t>(train_rows.size());
    for (int64_t start = 0; start < n_train; start += cfg.batch_size) {
      const int64_t len = std::min<int64_t>(cfg.batch_size, n_train - start);
      std::span<const int64_t> rows(train_rows.data() + start, static_cast<size_t>(len));
      const uint64_t batch_seed =
          bench::derive_seed(cfg.seed, {std::string("batch"), static_cast<int64_t>(epoch), start});
      double batch_loss = 0.0;
      GradMap g1 = grads_of_batch(rows, batch_seed, &batch_loss);
      if (!std::isfinite(batch_loss))
        throw TrainAbort("train: non-finite loss at epoch " + std::to_string(epoch));
      if (cfg.sam_enabled && cfg.sam_radius > 0.0) {
        std::vector<int64_t> fresh;
        if (!cfg.sam_same_batch) {
          core::Rng resample_rng(bench::derive_seed(batch_seed, {std::string("sam-batch")}));
          fresh.resize(static_cast<size_t>(len));
          for (auto& r : fresh) r = train_rows[static_cast<size_t>(resample_rng.uniform_int(0, n_train - 1))];
        }
        std::span<const int64_t> rows2 = cfg.sam_same_batch ? rows : std::span<const int64_t>(fresh);
        auto second_pass = [&](const ParamStore&) {
          double perturbed_loss = 0.0;
          GradMap g = grads_of_batch(rows2, batch_seed, &perturbed_loss);
          if (!std::isfinite(perturbed_loss))
            throw TrainAbort("train: non-finite perturbed loss at epoch " + std::to_string(epoch));
          return g;
        };
        sam_step(model.params(), second_pass, opt, cfg.sam_radius, g1);
      } else {
        opt.step(model.params(), g1);
      }
      epoch_loss += batch_loss * static_cast<double>(len);
      seen += len;
    }
    epoch_loss /= static_cast<double>(std::max<int64_t>(1, seen));

    const double val_loss = evaluate_loss(model, data, val_rows, 0);
    if (!std::isfinite(val_loss))
      throw TrainAbort("train: non-finite validation loss at epoch " + std::to_string(epoch));
    const bool improved = val_loss < log.best_val_loss;
    log.epochs.push_back({epoch, epoch_loss, val_loss, improved});
    log.epochs_run = epoch;
    if (improved) {
      log.best_val_loss = val_loss;
      log.best_epoch = epoch;
      best = model.params().snapshot();
      stale = 0;
    } else {
      ++stale;
      if (stale >= cfg.patience) break;
    }
  }

  model.params().restore(best);
  return log;
}

}  // namespace covbench::optim
