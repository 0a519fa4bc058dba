#include <doctest.h>

#include <cmath>
#include <sstream>

#include "core/rng.hpp"
#include "estimators/estimator.hpp"
#include "estimators/flow.hpp"
#include "estimators/spline.hpp"
#include "estimators/standardizer.hpp"

using namespace covbench;
using ad::Array;

namespace {

std::vector<double> random_raw(const est::RqsSpline& sp, core::Rng& rng, double scale = 1.0) {
  std::vector<double> raw(static_cast<size_t>(sp.param_count()));
  for (auto& v : raw) v = scale * rng.normal();
  return raw;
}

}  // namespace

TEST_CASE("zero spline parameters decode to the identity") {
  est::RqsSpline sp(8, 5.0);
  std::vector<double> raw(static_cast<size_t>(sp.param_count()), 0.0);
  auto g = sp.decode(raw);
  core::Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const double u = rng.uniform(-4.99, 4.99);
    double v, ld;
    sp.forward(u, g, &v, &ld);
    CHECK(v == doctest::Approx(u).epsilon(1e-12));
    CHECK(std::fabs(ld) < 1e-12);
  }
}

TEST_CASE("spline is the identity outside the tail bound") {
  est::RqsSpline sp(8, 5.0);
  core::Rng rng(4);
  auto g = sp.decode(random_raw(sp, rng));
  for (double u : {-7.3, 5.0, 5.1, 42.0, -5.0}) {
    double v, ld;
    sp.forward(u, g, &v, &ld);
    CHECK(v == u);
    CHECK(ld == 0.0);
    CHECK(sp.inverse(u, g) == u);
  }
}

TEST_CASE("spline log-derivative matches numerical differentiation") {
  est::RqsSpline sp(8, 5.0);
  core::Rng rng(11);
  for (int rep = 0; rep < 40; ++rep) {
    auto raw = random_raw(sp, rng);
    auto g = sp.decode(raw);
    const double u = rng.uniform(-4.9, 4.9);
    double v, ld, vp, vm, tmp;
    sp.forward(u, g, &v, &ld);
    const double h = 1e-6;
    sp.forward(u + h, g, &vp, &tmp);
    sp.forward(u - h, g, &vm, &tmp);
    const double fd = (vp - vm) / (2 * h);
    CHECK(std::exp(ld) == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("spline forward-inverse round trip") {
  est::RqsSpline sp(8, 5.0);
  core::Rng rng(12);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    auto g = sp.decode(random_raw(sp, rng, 1.5));
    const double u = rng.uniform(-4.999, 4.999);
    double v, ld;
    sp.forward(u, g, &v, &ld);
    worst = std::max(worst, std::fabs(sp.inverse(v, g) - u));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("spline rejects non-finite parameters") {
  est::RqsSpline sp(8, 5.0);
  std::vector<double> raw(static_cast<size_t>(sp.param_count()), 0.0);
  raw[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(sp.decode(raw), std::invalid_argument);
}

TEST_CASE("spline backward matches finite differences in u and all parameters") {
  est::RqsSpline sp(8, 5.0);
  core::Rng rng(13);
  const double h = 1e-6;
  for (int rep = 0; rep < 25; ++rep) {
    auto raw = random_raw(sp, rng);
    const double u = rng.uniform(-4.9, 4.9);
    // random adjoint weights for the two outputs
    const double gv = rng.normal(), gl = rng.normal();

    auto value = [&](const std::vector<double>& r, double uu) {
      auto g = sp.decode(r);
      double v, ld;
      sp.forward(uu, g, &v, &ld);
      return gv * v + gl * ld;
    };

    double grad_u = 0.0;
    std::vector<double> grad_raw(raw.size(), 0.0);
    sp.backward(u, sp.decode(raw), gv, gl, &grad_u, grad_raw);

    const double fd_u = (value(raw, u + h) - value(raw, u - h)) / (2 * h);
    CHECK(ad::relative_error(grad_u, fd_u) < 1e-4);
    for (size_t i = 0; i < raw.size(); ++i) {
      auto plus = raw, minus = raw;
      plus[i] += h;
      minus[i] -= h;
      const double fd = (value(plus, u) - value(minus, u)) / (2 * h);
      CAPTURE(rep);
      CAPTURE(i);
      CHECK(ad::relative_error(grad_raw[i], fd) < 1e-4);
    }
  }
}

TEST_CASE("standardizer fit and round trip") {
  core::Rng rng(21);
  Array rows({400, 3});
  for (int64_t i = 0; i < 400; ++i) {
    rows.at(i, 0) = 5.0 + 2.0 * rng.normal();
    rows.at(i, 1) = -1.0 + 0.1 * rng.normal();
    rows.at(i, 2) = 7.0;  // constant dimension
  }
  auto s = est::Standardizer::fit(rows);
  auto z = s.apply_rows(rows);
  double m0 = 0, v0 = 0;
  for (int64_t i = 0; i < 400; ++i) m0 += z.at(i, 0);
  m0 /= 400;
  for (int64_t i = 0; i < 400; ++i) v0 += (z.at(i, 0) - m0) * (z.at(i, 0) - m0);
  v0 /= 399;
  CHECK(std::fabs(m0) < 1e-12);
  CHECK(v0 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s.scale[2] == 1.0);  // constant dim passes through shifted only
  CHECK(z.at(0, 2) == 0.0);
  auto back = s.invert_rows(z);
  for (int64_t i = 0; i < back.size(); ++i) CHECK(back[i] == doctest::Approx(rows[i]).epsilon(1e-12));
}

TEST_CASE("identity-initialized flow is the standard normal") {
  est::FlowConfig cfg;
  est::ConditionalFlow flow(2, 3, cfg, 99);
  Array ctx = Array::vec({0.4, -1.0, 2.0});
  Array targets({4, 2});
  core::Rng rng(31);
  for (int64_t i = 0; i < targets.size(); ++i) targets[i] = rng.normal();
  auto lp = flow.logprob_rows(targets, ctx);
  for (int64_t i = 0; i < 4; ++i) {
    const double expected = -std::log(2 * M_PI) - 0.5 * (targets.at(i, 0) * targets.at(i, 0) +
                                                         targets.at(i, 1) * targets.at(i, 1));
    CHECK(lp[i] == doctest::Approx(expected).epsilon(1e-10));
  }

  // samples from the identity flow are standard normal: moment check
  auto draws = flow.sample(ctx, 20000, 55);
  double m = 0, v = 0;
  for (int64_t i = 0; i < draws.rows(); ++i) m += draws.at(i, 0);
  m /= static_cast<double>(draws.rows());
  for (int64_t i = 0; i < draws.rows(); ++i) v += (draws.at(i, 0) - m) * (draws.at(i, 0) - m);
  v /= static_cast<double>(draws.rows() - 1);
  CHECK(std::fabs(m) < 0.03);
  CHECK(v == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("flow graph and plain evaluations agree after random perturbation") {
  est::FlowConfig cfg;
  est::ConditionalFlow flow(3, 2, cfg, 5);
  core::Rng rng(6);
  // perturb all parameters so the flow is far from the identity
  auto& ps = flow.params();
  for (size_t i = 0; i < ps.count(); ++i)
    for (int64_t j = 0; j < ps.value(i).size(); ++j) ps.value(i)[j] += 0.3 * rng.normal();

  Array t({5, 3}), c({5, 2});
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  for (int64_t i = 0; i < c.size(); ++i) c[i] = rng.normal();

  est::GraphParams gp(ps);
  const double graph_sum = flow.logprob_sum_graph(gp, t, c)->value.item();
  auto rows = flow.logprob_rows(t, c);
  double plain_sum = 0;
  for (int64_t i = 0; i < rows.size(); ++i) plain_sum += rows[i];
  CHECK(graph_sum == doctest::Approx(plain_sum).epsilon(1e-12));
}

TEST_CASE("flow invertibility after random perturbation") {
  for (int d : {1, 2, 5}) {
    est::FlowConfig cfg;
    est::ConditionalFlow flow(d, 2, cfg, 7);
    core::Rng rng(8);
    auto& ps = flow.params();
    for (size_t i = 0; i < ps.count(); ++i)
      for (int64_t j = 0; j < ps.value(i).size(); ++j) ps.value(i)[j] += 0.4 * rng.normal();

    Array ctx({2});
    ctx[0] = 0.3;
    ctx[1] = -0.7;
    // round trip: sample -> logprob must be finite; explicit fwd/inv check via
    // sampling determinism
    auto draws = flow.sample(ctx, 64, 123);
    auto lp = flow.logprob_rows(draws, ctx);
    for (int64_t i = 0; i < lp.size(); ++i) CHECK(std::isfinite(lp[i]));
  }
}

TEST_CASE("gradcheck through a tiny flow NPE loss") {
  est::FlowConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 8;
  cfg.bins = 4;
  auto e = est::Estimator::make(est::EstimatorKind::NPE, 1, 2, 17, cfg);
  core::Rng rng(18);
  auto& ps = e->params();
  for (size_t i = 0; i < ps.count(); ++i)
    for (int64_t j = 0; j < ps.value(i).size(); ++j) ps.value(i)[j] += 0.2 * rng.normal();

  core::Dataset batch;
  batch.thetas = Array({6, 1});
  batch.xs = Array({6, 2});
  for (int64_t i = 0; i < batch.thetas.size(); ++i) batch.thetas[i] = rng.normal();
  for (int64_t i = 0; i < batch.xs.size(); ++i) batch.xs[i] = rng.normal();
  std::vector<int64_t> rows = {0, 1, 2, 3, 4, 5};

  // finite differences on every parameter of every tensor
  auto loss_value = [&] { return e->loss_graph(batch, rows, 0)->value.item(); };
  auto grads = ad::backward(e->loss_graph(batch, rows, 0));
  const double h = 1e-5;
  int checked = 0;
  for (size_t pi = 0; pi < ps.count(); ++pi) {
    const auto& name = ps.names()[pi];
    if (!grads.count(name)) continue;
    auto& v = ps.value(pi);
    for (int64_t j = 0; j < v.size(); j += std::max<int64_t>(1, v.size() / 7)) {
      const double orig = v[j];
      v[j] = orig + h;
      const double fp = loss_value();
      v[j] = orig - h;
      const double fm = loss_value();
      v[j] = orig;
      const double fd = (fp - fm) / (2 * h);
      CAPTURE(name);
      CAPTURE(j);
      CHECK(ad::relative_error(grads.at(name)[j], fd) < 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 30);
}

TEST_CASE("npe loss on standardized gaussian batch approximates gaussian entropy") {
  est::FlowConfig cfg;
  auto e = est::Estimator::make(est::EstimatorKind::NPE, 2, 2, 3, cfg);
  core::Rng rng(4);
  core::Dataset batch;
  const int64_t m = 4000;
  batch.thetas = Array({m, 2});
  batch.xs = Array({m, 2});
  for (int64_t i = 0; i < batch.thetas.size(); ++i) batch.thetas[i] = rng.normal();
  for (int64_t i = 0; i < batch.xs.size(); ++i) batch.xs[i] = rng.normal();
  const double loss = est::npe_loss(*e, batch);
  const double expected = std::log(2 * M_PI) + 1.0;  // d/2 log(2pi) + d/2, d=2
  CHECK(loss == doctest::Approx(expected).epsilon(0.05));

  // duplicating the batch leaves the loss unchanged
  core::Dataset doubled;
  doubled.thetas = Array({2 * m, 2});
  doubled.xs = Array({2 * m, 2});
  for (int64_t i = 0; i < batch.thetas.size(); ++i) {
    doubled.thetas[i] = batch.thetas[i];
    doubled.thetas[batch.thetas.size() + i] = batch.thetas[i];
    doubled.xs[i] = batch.xs[i];
    doubled.xs[batch.xs.size() + i] = batch.xs[i];
  }
  CHECK(est::npe_loss(*e, doubled) == doctest::Approx(loss).epsilon(1e-12));
}

TEST_CASE("nre loss with zero logits equals ln 2 and rejects singleton batches") {
  est::NreConfig nc;
  auto e = est::Estimator::make(est::EstimatorKind::NRE, 1, 2, 5, {}, nc);
  // zero the output layer so the logit is exactly 0
  auto& ps = e->params();
  for (size_t i = 0; i < ps.count(); ++i) {
    if (ps.names()[i].find("w3") != std::string::npos || ps.names()[i].find("b3") != std::string::npos)
      for (int64_t j = 0; j < ps.value(i).size(); ++j) ps.value(i)[j] = 0.0;
  }
  core::Rng rng(6);
  core::Dataset batch;
  batch.thetas = Array({32, 1});
  batch.xs = Array({32, 2});
  for (int64_t i = 0; i < batch.thetas.size(); ++i) batch.thetas[i] = rng.normal();
  for (int64_t i = 0; i < batch.xs.size(); ++i) batch.xs[i] = rng.normal();
  CHECK(est::nre_loss(*e, batch, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  core::Dataset one;
  one.thetas = Array({1, 1});
  one.xs = Array({1, 2});
  CHECK_THROWS_AS(est::nre_loss(*e, one, 1), std::invalid_argument);
}

TEST_CASE("nre derangement shift never maps a pair to itself") {
  for (int64_t m : {2, 3, 17, 128}) {
    for (uint64_t seed = 0; seed < 20; ++seed) {
      const int64_t s = est::Estimator::nre_shift(m, seed);
      CHECK(s >= 1);
      CHECK(s <= m - 1);
    }
  }
}

TEST_CASE("estimator serialization round trips byte-identically") {
  est::FlowConfig cfg;
  cfg.layers = 3;
  auto e = est::Estimator::make(est::EstimatorKind::NPE, 2, 4, 31, cfg);
  core::Rng rng(32);
  auto& ps = e->params();
  for (size_t i = 0; i < ps.count(); ++i)
    for (int64_t j = 0; j < ps.value(i).size(); ++j) ps.value(i)[j] += rng.normal();
  core::Dataset ds;
  ds.thetas = Array({100, 2});
  ds.xs = Array({100, 4});
  for (int64_t i = 0; i < ds.thetas.size(); ++i) ds.thetas[i] = 2 + rng.normal();
  for (int64_t i = 0; i < ds.xs.size(); ++i) ds.xs[i] = -1 + 3 * rng.normal();
  e->fit_standardizers(ds);

  std::stringstream s1;
  e->save(s1);
  auto e2 = est::Estimator::load(s1);
  std::stringstream s2;
  e2->save(s2);
  CHECK(s1.str() == s2.str());

  // loaded estimator evaluates identically
  Array th({3, 2}), x({4});
  for (int64_t i = 0; i < th.size(); ++i) th[i] = rng.normal();
  for (int64_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
  auto a = e->posterior_logprob_rows(th, x);
  auto b = e2->posterior_logprob_rows(th, x);
  for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("1-D flow density integrates to one on a grid") {
  est::FlowConfig cfg;
  est::ConditionalFlow flow(1, 2, cfg, 44);
  core::Rng rng(45);
  // mild perturbation: extreme random weights squeeze the density into
  // spikes a quadrature grid cannot resolve
  auto& ps = flow.params();
  for (size_t i = 0; i < ps.count(); ++i)
    for (int64_t j = 0; j < ps.value(i).size(); ++j) ps.value(i)[j] += 0.05 * rng.normal();
  Array ctx = Array::vec({0.2, -0.4});

  const int n = 24001;
  const double lo = -12.0, hi = 12.0;
  const double h = (hi - lo) / (n - 1);
  Array grid({n, 1});
  for (int i = 0; i < n; ++i) grid.at(i, 0) = lo + i * h;
  auto lp = flow.logprob_rows(grid, ctx);
  double integral = 0;
  for (int i = 0; i < n; ++i) integral += std::exp(lp[i]) * h * ((i == 0 || i == n - 1) ? 0.5 : 1.0);
  CHECK(integral == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("every coordinate is transformed at least once across layers") {
  for (int d : {1, 2, 3, 5, 8, 100}) {
    est::FlowConfig cfg;
    est::ConditionalFlow flow(d, 1, cfg, 1);
    const auto per_layer = flow.transformed_indices_per_layer();
    REQUIRE(per_layer.size() == 5);
    std::vector<char> seen(static_cast<size_t>(d), 0);
    for (const auto& layer : per_layer)
      for (int idx : layer) {
        REQUIRE(idx >= 0);
        REQUIRE(idx < d);
        seen[static_cast<size_t>(idx)] = 1;
      }
    for (int j = 0; j < d; ++j) {
      CAPTURE(d);
      CAPTURE(j);
      CHECK(seen[static_cast<size_t>(j)] == 1);
    }
  }
}
