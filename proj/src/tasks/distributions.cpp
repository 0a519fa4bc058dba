#include "tasks/distributions.hpp"

#include <stdexcept>

namespace covbench::tasks {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

double gaussian_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * (kLogTwoPi + z * z) - std::log(sd);
}

double gamma_logpdf(double x, double shape, double rate) {
  if (x <= 0.0) return -kInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double uniform_logpdf(double x, double lo, double hi) {
  if (x < lo || x > hi) return -kInf;
  return -std::log(hi - lo);
}

double student_t_logpdf(double x, double dof, double loc, double scale) {
  const double z = (x - loc) / scale;
  return std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) - 0.5 * std::log(dof * M_PI) -
         std::log(scale) - 0.5 * (dof + 1.0) * std::log1p(z * z / dof);
}

Prior gaussian_prior(double mean, double sd) {
  Prior p;
  p.dim = 1;
  p.lower = {-kInf};
  p.upper = {kInf};
  p.sample = [mean, sd](core::Rng& rng, std::span<double> out) { out[0] = rng.normal(mean, sd); };
  p.logpdf = [mean, sd](std::span<const double> th) { return gaussian_logpdf(th[0], mean, sd); };
  return p;
}

Prior gamma_prior(std::vector<double> shapes, std::vector<double> rates) {
  if (shapes.size() != rates.size() || shapes.empty())
    throw std::invalid_argument("gamma_prior: shapes and rates must have equal nonzero size");
  Prior p;
  p.dim = static_cast<int>(shapes.size());
  p.lower.assign(shapes.size(), 0.0);
  p.upper.assign(shapes.size(), kInf);
  p.sample = [shapes, rates](core::Rng& rng, std::span<double> out) {
    for (size_t i = 0; i < shapes.size(); ++i) out[i] = rng.gamma(shapes[i], rates[i]);
  };
  p.logpdf = [shapes, rates](std::span<const double> th) {
    double acc = 0.0;
    for (size_t i = 0; i < shapes.size(); ++i) acc += gamma_logpdf(th[i], shapes[i], rates[i]);
    return acc;
  };
  return p;
}

Prior uniform_box_prior(int dim, double lo, double hi) {
  Prior p;
  p.dim = dim;
  p.lower.assign(static_cast<size_t>(dim), lo);
  p.upper.assign(static_cast<size_t>(dim), hi);
  p.sample = [dim, lo, hi](core::Rng& rng, std::span<double> out) {
    for (int i = 0; i < dim; ++i) out[static_cast<size_t>(i)] = rng.uniform(lo, hi);
  };
  p.logpdf = [dim, lo, hi](std::span<const double> th) {
    double acc = 0.0;
    for (int i = 0; i < dim; ++i) acc += uniform_logpdf(th[static_cast<size_t>(i)], lo, hi);
    return acc;
  };
  return p;
}

}  // namespace covbench::tasks
