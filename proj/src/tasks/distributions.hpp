#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "core/rng.hpp"

namespace covbench::tasks {

double gaussian_logpdf(double x, double mean, double sd);
// shape-rate parameterization
double gamma_logpdf(double x, double shape, double rate);
double uniform_logpdf(double x, double lo, double hi);
// location-scale Student-t
double student_t_logpdf(double x, double dof, double loc, double scale);

// Product prior over independent scalar components. Bounds are +-inf for
// unbounded coordinates.
struct Prior {
  int dim = 0;
  std::function<void(core::Rng&, std::span<double>)> sample;
  std::function<double(std::span<const double>)> logpdf;
  std::vector<double> lower, upper;

  bool bounded() const {
    for (double v : lower)
      if (!std::isfinite(v)) return false;
    for (double v : upper)
      if (!std::isfinite(v)) return false;
    return dim > 0;
  }
};

Prior gaussian_prior(double mean, double sd);
// independent Gamma(shape_i, rate_i) coordinates
Prior gamma_prior(std::vector<double> shapes, std::vector<double> rates);
Prior uniform_box_prior(int dim, double lo, double hi);

}  // namespace covbench::tasks
