#pragma once

#include <array>
#include <span>

namespace covbench::est {

// Monotone rational-quadratic spline on [-bound, bound] with identity tails.
// Raw parameters per element: K width logits, K height logits, K-1 interior
// derivative raws. Zero raw parameters decode to the identity map exactly.
class RqsSpline {
 public:
  static constexpr int kMaxBins = 32;

  RqsSpline(int bins, double bound);

  int bins() const { return bins_; }
  double bound() const { return bound_; }
  int param_count() const { return 3 * bins_ - 1; }

  struct Geometry {
    std::array<double, kMaxBins> w, h;        // bin widths / heights
    std::array<double, kMaxBins + 1> xs, ys;  // cumulative knots
    std::array<double, kMaxBins + 1> d;       // knot derivatives, d[0]=d[K]=1
    std::array<double, kMaxBins> pw, ph;      // softmax probabilities
    std::array<double, kMaxBins> sig;         // sigmoid(c+shift) for interior knots
  };

  Geometry decode(std::span<const double> raw) const;

  // v and log|dv/du|; identity outside the bound.
  void forward(double u, const Geometry& g, double* v, double* log_deriv) const;

  double inverse(double v, const Geometry& g) const;

  // Adjoint of (v, log_deriv) with respect to u and the raw parameters.
  // grad_raw is accumulated into (not overwritten).
  void backward(double u, const Geometry& g, double adj_v, double adj_logd, double* grad_u,
                std::span<double> grad_raw) const;

 private:
  int find_bin(double t, const double* knots) const;

  int bins_;
  double bound_;
  double min_frac_ = 1e-3;  // minimum bin fraction of the total span
  double deriv_shift_;      // softplus(deriv_shift_) + min_deriv_ == 1
  double min_deriv_ = 1e-6;
};

}  // namespace covbench::est
