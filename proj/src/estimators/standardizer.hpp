#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ad/array.hpp"

namespace covbench::est {

// Per-dimension affine rescaling fitted on training data; frozen afterwards.
// Zero-spread dimensions are shifted only.
struct Standardizer {
  std::vector<double> shift, scale;

  int dim() const { return static_cast<int>(shift.size()); }

  static Standardizer identity(int d) {
    Standardizer s;
    s.shift.assign(static_cast<size_t>(d), 0.0);
    s.scale.assign(static_cast<size_t>(d), 1.0);
    return s;
  }

  static Standardizer fit(const ad::Array& rows) {
    if (rows.rank() != 2 || rows.rows() < 2)
      throw std::invalid_argument("standardizer: need a 2-D array with at least 2 rows");
    const int64_t n = rows.rows(), d = rows.cols();
    Standardizer s;
    s.shift.assign(static_cast<size_t>(d), 0.0);
    s.scale.assign(static_cast<size_t>(d), 1.0);
    for (int64_t j = 0; j < d; ++j) {
      double m = 0.0;
      for (int64_t i = 0; i < n; ++i) m += rows.at(i, j);
      m /= static_cast<double>(n);
      double var = 0.0;
      for (int64_t i = 0; i < n; ++i) var += (rows.at(i, j) - m) * (rows.at(i, j) - m);
      var /= static_cast<double>(n - 1);
      s.shift[static_cast<size_t>(j)] = m;
      const double sd = std::sqrt(var);
      s.scale[static_cast<size_t>(j)] = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  ad::Array apply_rows(const ad::Array& rows) const {
    ad::Array out = rows;
    const int64_t d = out.cols();
    for (int64_t i = 0; i < out.rows(); ++i)
      for (int64_t j = 0; j < d; ++j)
        out.at(i, j) = (out.at(i, j) - shift[static_cast<size_t>(j)]) / scale[static_cast<size_t>(j)];
    return out;
  }

  ad::Array invert_rows(const ad::Array& rows) const {
    ad::Array out = rows;
    const int64_t d = out.cols();
    for (int64_t i = 0; i < out.rows(); ++i)
      for (int64_t j = 0; j < d; ++j)
        out.at(i, j) = out.at(i, j) * scale[static_cast<size_t>(j)] + shift[static_cast<size_t>(j)];
    return out;
  }

  double log_scale_sum() const {
    double acc = 0.0;
    for (double s : scale) acc += std::log(s);
    return acc;
  }
};

}  // namespace covbench::est
