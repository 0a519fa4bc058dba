#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ad/graph.hpp"
#include "core/dataset.hpp"
#include "optim/optimizer.hpp"

namespace covbench::optim {

struct TrainConfig {
  int batch_size = 128;
  double validation_fraction = 0.1;
  int patience = 20;
  std::optional<int> max_epochs;  // unset = unlimited
  bool sam_enabled = false;
  double sam_radius = 0.05;
  // SAM's second gradient reuses the first mini-batch when true.
  bool sam_same_batch = true;
  uint64_t seed = 0;
  AdamConfig adam;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool improved = false;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0 = initial parameters
  double best_val_loss = 0.0;
  int epochs_run = 0;
};

// A model the shared loop can train: it owns parameters and can build the
// loss graph over any subset of a dataset.
class TrainableModel {
 public:
  virtual ~TrainableModel() = default;
  virtual ParamStore& params() = 0;
  virtual ad::Value loss_graph(const core::Dataset& data, std::span<const int64_t> rows,
                               uint64_t batch_seed) = 0;
};

// Early-stopping mini-batch training. Splits the dataset deterministically by
// cfg.seed, stops once validation loss fails to improve for cfg.patience
// consecutive epochs and restores the best-validation parameters.
TrainLog train(TrainableModel& model, const core::Dataset& data, const TrainConfig& cfg);

}  // namespace covbench::optim
