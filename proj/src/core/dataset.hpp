#pragma once

#include <cstdint>
#include <stdexcept>

#include "ad/array.hpp"

namespace covbench::core {

// Paired (theta, x) training set; one row per simulation draw.
struct Dataset {
  ad::Array thetas;  // n x theta_dim
  ad::Array xs;      // n x x_dim

  int64_t n() const { return thetas.rank() == 2 ? thetas.rows() : 0; }
  int64_t theta_dim() const { return thetas.cols(); }
  int64_t x_dim() const { return xs.cols(); }

  void validate() const {
    if (thetas.rank() != 2 || xs.rank() != 2 || thetas.rows() != xs.rows())
      throw std::invalid_argument("dataset: thetas and xs must be 2-D with matching row counts");
  }
};

}  // namespace covbench::core
