#include "estimators/spline.hpp"

#include <cmath>
#include <stdexcept>

namespace covbench::est {

namespace {

double stable_softplus(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

RqsSpline::RqsSpline(int bins, double bound) : bins_(bins), bound_(bound) {
  if (bins < 2 || bins > kMaxBins) throw std::invalid_argument("RqsSpline: bins out of range");
  if (!(bound > 0.0)) throw std::invalid_argument("RqsSpline: bound must be positive");
  deriv_shift_ = std::log(std::expm1(1.0 - min_deriv_));
}

RqsSpline::Geometry RqsSpline::decode(std::span<const double> raw) const {
  if (raw.size() != static_cast<size_t>(param_count()))
    throw std::invalid_argument("RqsSpline: wrong parameter count");
  for (double r : raw)
    if (!std::isfinite(r)) throw std::invalid_argument("RqsSpline: non-finite parameter");

  Geometry g{};
  const int K = bins_;
  const double span = 2.0 * bound_;
  auto softmax_fill = [&](const double* logits, std::array<double, kMaxBins>& probs,
                          std::array<double, kMaxBins>& sizes) {
    double mx = logits[0];
    for (int i = 1; i < K; ++i) mx = std::max(mx, logits[i]);
    double z = 0.0;
    for (int i = 0; i < K; ++i) {
      probs[static_cast<size_t>(i)] = std::exp(logits[i] - mx);
      z += probs[static_cast<size_t>(i)];
    }
    const double keep = 1.0 - K * min_frac_;
    for (int i = 0; i < K; ++i) {
      probs[static_cast<size_t>(i)] /= z;
      sizes[static_cast<size_t>(i)] = span * (keep * probs[static_cast<size_t>(i)] + min_frac_);
    }
  };
  softmax_fill(raw.data(), g.pw, g.w);
  softmax_fill(raw.data() + K, g.ph, g.h);

  g.xs[0] = -bound_;
  g.ys[0] = -bound_;
  for (int i = 0; i < K; ++i) {
    g.xs[static_cast<size_t>(i + 1)] = g.xs[static_cast<size_t>(i)] + g.w[static_cast<size_t>(i)];
    g.ys[static_cast<size_t>(i + 1)] = g.ys[static_cast<size_t>(i)] + g.h[static_cast<size_t>(i)];
  }
  g.xs[static_cast<size_t>(K)] = bound_;
  g.ys[static_cast<size_t>(K)] = bound_;

  g.d[0] = 1.0;
  g.d[static_cast<size_t>(K)] = 1.0;
  for (int i = 1; i < K; ++i) {
    const double c = raw[static_cast<size_t>(2 * K + i - 1)] + deriv_shift_;
    g.d[static_cast<size_t>(i)] = min_deriv_ + stable_softplus(c);
    g.sig[static_cast<size_t>(i - 1)] = sigmoid(c);
  }
  return g;
}

int RqsSpline::find_bin(double t, const double* knots) const {
  // largest k with knots[k] <= t, clamped to [0, K-1]
  int lo = 0, hi = bins_ - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (knots[mid] <= t)
      lo = mid;
    else
      hi = mid - 1;
  }
  return lo;
}

void RqsSpline::forward(double u, const Geometry& g, double* v, double* log_deriv) const {
  if (u <= -bound_ || u >= bound_) {
    *v = u;
    *log_deriv = 0.0;
    return;
  }
  const int k = find_bin(u, g.xs.data());
  const double wk = g.w[static_cast<size_t>(k)];
  const double hk = g.h[static_cast<size_t>(k)];
  const double dk = g.d[static_cast<size_t>(k)];
  const double dk1 = g.d[static_cast<size_t>(k + 1)];
  const double xi = (u - g.xs[static_cast<size_t>(k)]) / wk;
  const double s = hk / wk;
  const double P = xi * (1.0 - xi);
  const double A = dk1 + dk - 2.0 * s;
  const double D = s + A * P;
  const double N = hk * (s * xi * xi + dk * P);
  *v = g.ys[static_cast<size_t>(k)] + N / D;
  const double G = dk1 * xi * xi + 2.0 * s * P + dk * (1.0 - xi) * (1.0 - xi);
  *log_deriv = 2.0 * std::log(s) + std::log(G) - 2.0 * std::log(D);
}

double RqsSpline::inverse(double v, const Geometry& g) const {
  if (v <= -bound_ || v >= bound_) return v;
  const int k = find_bin(v, g.ys.data());
  const double wk = g.w[static_cast<size_t>(k)];
  const double hk = g.h[static_cast<size_t>(k)];
  const double dk = g.d[static_cast<size_t>(k)];
  const double dk1 = g.d[static_cast<size_t>(k + 1)];
  const double s = hk / wk;
  const double A = dk1 + dk - 2.0 * s;
  const double t = v - g.ys[static_cast<size_t>(k)];
  // quadratic a xi^2 + b xi + c = 0, stable root
  const double qa = hk * (s - dk) + t * A;
  const double qb = hk * dk - t * A;
  const double qc = -s * t;
  const double disc = std::max(qb * qb - 4.0 * qa * qc, 0.0);
  const double xi = 2.0 * qc / (-qb - std::sqrt(disc));
  return g.xs[static_cast<size_t>(k)] + std::min(std::max(xi, 0.0), 1.0) * wk;
}

void RqsSpline::backward(double u, const Geometry& g, double adj_v, double adj_logd, double* grad_u,
                         std::span<double> grad_raw) const {
  const int K = bins_;
  if (u <= -bound_ || u >= bound_) {
    *grad_u = adj_v;  // identity tail: dv/du = 1, no parameter dependence
    return;
  }
  const int k = find_bin(u, g.xs.data());
  const double wk = g.w[static_cast<size_t>(k)];
  const double hk = g.h[static_cast<size_t>(k)];
  const double dk = g.d[static_cast<size_t>(k)];
  const double dk1 = g.d[static_cast<size_t>(k + 1)];
  const double xi = (u - g.xs[static_cast<size_t>(k)]) / wk;
  const double s = hk / wk;
  const double P = xi * (1.0 - xi);
  const double A = dk1 + dk - 2.0 * s;
  const double D = s + A * P;
  const double N = hk * (s * xi * xi + dk * P);
  const double G = dk1 * xi * xi + 2.0 * s * P + dk * (1.0 - xi) * (1.0 - xi);

  // Partials of N, D, G w.r.t. the local quantities.
  const double N_xi = hk * (2.0 * s * xi + dk * (1.0 - 2.0 * xi));
  const double N_s = hk * xi * xi;
  const double N_dk = hk * P;
  const double D_xi = A * (1.0 - 2.0 * xi);
  const double D_s = 1.0 - 2.0 * P;
  const double D_d = P;  // same for dk and dk1
  const double G_xi = 2.0 * dk1 * xi + 2.0 * s * (1.0 - 2.0 * xi) - 2.0 * dk * (1.0 - xi);
  const double G_s = 2.0 * P;
  const double G_dk = (1.0 - xi) * (1.0 - xi);
  const double G_dk1 = xi * xi;

  const double inv_D2 = 1.0 / (D * D);
  // v = y_k + N/D
  const double v_xi = (N_xi * D - N * D_xi) * inv_D2;
  const double v_s = (N_s * D - N * D_s) * inv_D2;
  const double v_dk = (N_dk * D - N * D_d) * inv_D2;
  const double v_dk1 = (-N * D_d) * inv_D2;
  const double v_hk_direct = (N / hk) / D;
  // L = 2 ln s + ln G - 2 ln D
  const double L_xi = G_xi / G - 2.0 * D_xi / D;
  const double L_s = 2.0 / s + G_s / G - 2.0 * D_s / D;
  const double L_dk = G_dk / G - 2.0 * D_d / D;
  const double L_dk1 = G_dk1 / G - 2.0 * D_d / D;

  const double F_xi = adj_v * v_xi + adj_logd * L_xi;
  const double F_s = adj_v * v_s + adj_logd * L_s;
  const double F_dk = adj_v * v_dk + adj_logd * L_dk;
  const double F_dk1 = adj_v * v_dk1 + adj_logd * L_dk1;

  // Chain xi = (u - x_k)/w_k and s = h_k/w_k.
  *grad_u = F_xi / wk;
  const double F_xk = -F_xi / wk;
  const double F_yk = adj_v;  // only v depends on y_k
  double gw[kMaxBins] = {0};
  double gh[kMaxBins] = {0};
  gw[k] += F_xi * (-xi / wk) + F_s * (-s / wk);
  gh[k] += F_s / wk + adj_v * v_hk_direct;
  // cumulative knots: x_k = -B + sum_{j<k} w_j, y_k likewise
  for (int j = 0; j < k; ++j) {
    gw[j] += F_xk;
    gh[j] += F_yk;
  }

  // widths/heights through the clamped softmax
  const double keep = 1.0 - K * min_frac_;
  const double span = 2.0 * bound_;
  auto softmax_chain = [&](const double* gsz, const std::array<double, kMaxBins>& probs, size_t offset) {
    double dot = 0.0;
    for (int i = 0; i < K; ++i) dot += gsz[i] * probs[static_cast<size_t>(i)];
    for (int i = 0; i < K; ++i) {
      const double gi = span * keep * probs[static_cast<size_t>(i)] * (gsz[i] - dot);
      grad_raw[offset + static_cast<size_t>(i)] += gi;
    }
  };
  softmax_chain(gw, g.pw, 0);
  softmax_chain(gh, g.ph, static_cast<size_t>(K));

  // interior derivatives through softplus
  if (k >= 1) grad_raw[static_cast<size_t>(2 * K + k - 1)] += F_dk * g.sig[static_cast<size_t>(k - 1)];
  if (k + 1 <= K - 1) grad_raw[static_cast<size_t>(2 * K + k)] += F_dk1 * g.sig[static_cast<size_t>(k)];
}

}  // namespace covbench::est
