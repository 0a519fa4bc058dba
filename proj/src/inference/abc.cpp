#include "inference/abc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace covbench::inference {

AbcSimTable abc_simulate_table(const tasks::Task& task, int64_t n_total, uint64_t seed,
                               bool standardize_distance) {
  if (n_total < 100) throw std::invalid_argument("abc: n_total must be >= 100");
  AbcSimTable table;
  table.standardize_distance = standardize_distance;
  const auto ds = tasks::make_training_set(task, n_total, seed);
  table.thetas = ds.thetas;
  table.xs = ds.xs;
  table.scale.assign(static_cast<size_t>(task.x_dim), 1.0);
  for (int j = 0; j < task.x_dim; ++j) {
    double m = 0.0;
    for (int64_t i = 0; i < n_total; ++i) m += table.xs.at(i, j);
    m /= static_cast<double>(n_total);
    double var = 0.0;
    for (int64_t i = 0; i < n_total; ++i) {
      const double dv = table.xs.at(i, j) - m;
      var += dv * dv;
    }
    var /= static_cast<double>(n_total - 1);
    const double sd = std::sqrt(var);
    table.scale[static_cast<size_t>(j)] = sd > 0.0 ? sd : 1.0;
  }
  return table;
}

AbcResult abc_rejection(const AbcSimTable& table, const ad::Array& y, double acceptance_rate) {
  if (!(acceptance_rate > 0.0 && acceptance_rate <= 1.0))
    throw std::invalid_argument("abc: acceptance rate must lie in (0, 1]");
  const int64_t n = table.xs.rows();
  const int64_t d = table.xs.cols();
  if (y.size() != d) throw std::invalid_argument("abc: observation dimension mismatch");
  const auto n_keep = static_cast<int64_t>(std::ceil(acceptance_rate * static_cast<double>(n)));

  std::vector<std::pair<double, int64_t>> dist(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      double z = table.xs.at(i, j) - y[j];
      if (table.standardize_distance) z /= table.scale[static_cast<size_t>(j)];
      acc += z * z;
    }
    dist[static_cast<size_t>(i)] = {std::sqrt(acc), i};
  }
  // index tie-break keeps the accepted set deterministic
  std::nth_element(dist.begin(), dist.begin() + n_keep - 1, dist.end());
  std::sort(dist.begin(), dist.begin() + n_keep);

  AbcResult res;
  res.distance_kind = table.standardize_distance ? "standardized_euclidean" : "euclidean";
  const int64_t theta_dim = table.thetas.cols();
  res.samples = ad::Array({n_keep, theta_dim});
  for (int64_t i = 0; i < n_keep; ++i) {
    const int64_t src = dist[static_cast<size_t>(i)].second;
    for (int64_t j = 0; j < theta_dim; ++j) res.samples.at(i, j) = table.thetas.at(src, j);
  }
  res.threshold = dist[static_cast<size_t>(n_keep - 1)].first;
  return res;
}

AbcResult abc_rejection(const tasks::Task& task, const ad::Array& y, int64_t n_total,
                        double acceptance_rate, uint64_t seed) {
  return abc_rejection(abc_simulate_table(task, n_total, seed), y, acceptance_rate);
}

}  // namespace covbench::inference
