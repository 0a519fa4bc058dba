#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ad/array.hpp"
#include "tasks/tasks.hpp"

namespace covbench::inference {

// Prior-predictive simulation table; reusable across observations since the
// draws do not depend on y.
struct AbcSimTable {
  ad::Array thetas;           // n x theta_dim
  ad::Array xs;               // n x x_dim (summaries applied)
  std::vector<double> scale;  // per-dimension prior-predictive sd
  // Plain Euclidean distance by default; standardization divides each
  // dimension by its prior-predictive sd before the norm.
  bool standardize_distance = false;
};

AbcSimTable abc_simulate_table(const tasks::Task& task, int64_t n_total, uint64_t seed,
                               bool standardize_distance = false);

struct AbcResult {
  ad::Array samples;  // n_keep x theta_dim, ordered by increasing distance
  double threshold = 0.0;
  std::string distance_kind = "euclidean";
};

// Keeps the ceil(acceptance_rate * n) draws closest to y in standardized
// Euclidean distance. Deterministic for a given table.
AbcResult abc_rejection(const AbcSimTable& table, const ad::Array& y, double acceptance_rate);

AbcResult abc_rejection(const tasks::Task& task, const ad::Array& y, int64_t n_total,
                        double acceptance_rate, uint64_t seed);

}  // namespace covbench::inference
