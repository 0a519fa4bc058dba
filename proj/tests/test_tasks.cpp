#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bench/seeding.hpp"
#include "tasks/tasks.hpp"

using namespace covbench;
using ad::Array;

namespace {

double mean_of(const Array& x) {
  double acc = 0;
  for (int64_t i = 0; i < x.size(); ++i) acc += x[i];
  return acc / static_cast<double>(x.size());
}

double var_of(const Array& x) {
  const double m = mean_of(x);
  double acc = 0;
  for (int64_t i = 0; i < x.size(); ++i) acc += (x[i] - m) * (x[i] - m);
  return acc / static_cast<double>(x.size() - 1);
}

}  // namespace

TEST_CASE("tg simulator moments") {
  auto x = tasks::tg_simulate(0.0, 123);
  CHECK(std::fabs(mean_of(x)) < 0.4);
  CHECK(var_of(x) > 0.6);
  CHECK(var_of(x) < 1.5);

  // location family: same seed shifts every draw by theta
  auto x10 = tasks::tg_simulate(10.0, 123);
  for (int64_t i = 0; i < x.size(); ++i) CHECK(x10[i] == doctest::Approx(x[i] + 10.0).epsilon(1e-12));

  // empirical mean over 1e4 simulations at theta=2 within 4 s.e.
  double acc = 0;
  const int reps = 10000;
  for (int r = 0; r < reps; ++r) acc += mean_of(tasks::tg_simulate(2.0, 1000 + static_cast<uint64_t>(r)));
  CHECK(std::fabs(acc / reps - 2.0) < 0.004);
}

TEST_CASE("tg summary") {
  Array zeros({100});
  auto s = tasks::tg_summary(zeros);
  CHECK(s[0] == 0.0);
  CHECK(s[1] == 0.0);

  Array alt({100});
  for (int64_t i = 0; i < 100; ++i) alt[i] = i % 2 == 0 ? 1.0 : -1.0;
  s = tasks::tg_summary(alt);
  CHECK(s[0] == 0.0);
  CHECK(s[1] == doctest::Approx(std::sqrt(100.0 / 99.0)));  // ~1.005

  auto c = Array::full({100}, 3.25);
  s = tasks::tg_summary(c);
  CHECK(s[0] == 3.25);
  CHECK(s[1] == 0.0);
}

TEST_CASE("tg transform") {
  auto x = tasks::tg_simulate(1.0, 5);
  Array z({100});
  for (int64_t i = 0; i < 100; ++i) z[i] = 1.0;
  auto y0 = tasks::tg_transform(x, 0, z);
  for (int64_t i = 0; i < 100; ++i) CHECK(y0[i] == x[i]);  // bitwise identity
  Array x0 = Array::zeros({100});
  auto y2 = tasks::tg_transform(x0, 2, z);
  for (int64_t i = 0; i < 100; ++i) CHECK(y2[i] == 2.0);

  // variance over the z-distribution at sigma=3: Var(x) + 9 per coordinate
  core::Rng rng(99);
  double acc = 0;
  const int reps = 4000;
  for (int r = 0; r < reps; ++r) {
    Array zr({100});
    for (int64_t i = 0; i < 100; ++i) zr[i] = rng.normal();
    auto y = tasks::tg_transform(x0, 3, zr);
    acc += y[0] * y[0];
  }
  CHECK(acc / reps == doctest::Approx(9.0).epsilon(0.15));
}

TEST_CASE("tg conjugate posterior") {
  double mu, var;
  tasks::tg_conjugate(0.0, 100, &mu, &var);
  CHECK(mu == 0.0);
  CHECK(var == doctest::Approx(25.0 / 2501.0).epsilon(1e-12));
  tasks::tg_conjugate(1.0, 100, &mu, &var);
  CHECK(mu == doctest::Approx(2500.0 / 2501.0).epsilon(1e-12));
  // no data: the prior
  tasks::tg_conjugate(3.0, 0, &mu, &var);
  CHECK(mu == 0.0);
  CHECK(var == 25.0);
}

TEST_CASE("tg conjugate matches grid integration of prior x likelihood") {
  core::Rng rng(7);
  for (int rep = 0; rep < 5; ++rep) {
    const double theta_true = rng.normal(0.0, 5.0);
    auto y = tasks::tg_simulate(theta_true, 50 + static_cast<uint64_t>(rep));
    const double ybar = mean_of(y);
    double mu, var;
    tasks::tg_conjugate(ybar, 100, &mu, &var);
    const double sd = std::sqrt(var);
    // trapezoid over mu +- 10 sd; log-density stabilized around its max
    const int n = 4001;
    const double lo = mu - 10 * sd, hi = mu + 10 * sd;
    const double h = (hi - lo) / (n - 1);
    double z = 0, m1 = 0, m2 = 0;
    for (int i = 0; i < n; ++i) {
      const double th = lo + i * h;
      double lp = tasks::gaussian_logpdf(th, 0.0, 5.0);
      lp += -0.5 * 100.0 * (th - ybar) * (th - ybar);  // unit-variance likelihood up to const
      const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      const double f = std::exp(lp + 0.5 * 100.0 * (mu - ybar) * (mu - ybar));
      z += w * f;
      m1 += w * f * th;
      m2 += w * f * th * th;
    }
    const double mean_gi = m1 / z;
    const double var_gi = m2 / z - mean_gi * mean_gi;
    CHECK(std::fabs(mean_gi - mu) / std::max(std::fabs(mu), 1e-3) < 1e-6);
    CHECK(std::fabs(var_gi - var) / var < 1e-6);
  }
}

TEST_CASE("prior log-densities match closed forms on random points") {
  core::Rng rng(21);
  auto tg = tasks::make_task(tasks::TaskName::TG);
  auto sv = tasks::make_task(tasks::TaskName::SV);
  auto slcp = tasks::make_task(tasks::TaskName::SLCP);
  for (int i = 0; i < 50; ++i) {
    const double th = rng.normal(0, 5);
    const double expected = -0.5 * std::log(2 * M_PI * 25.0) - th * th / 50.0;
    CHECK(tg.prior.logpdf({&th, 1}) == doctest::Approx(expected).epsilon(1e-12));

    const double tv[2] = {rng.gamma(5, 25), rng.gamma(5, 1)};
    const double lg = tasks::gamma_logpdf(tv[0], 5, 25) + tasks::gamma_logpdf(tv[1], 5, 1);
    CHECK(sv.prior.logpdf({tv, 2}) == doctest::Approx(lg).epsilon(1e-12));

    double u[5];
    for (auto& v : u) v = rng.uniform(-3, 3);
    CHECK(slcp.prior.logpdf({u, 5}) == doctest::Approx(5 * -std::log(6.0)).epsilon(1e-12));
  }
  const double neg = -0.1;
  CHECK(sv.prior.logpdf({&neg, 1}) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("sv simulator") {
  SUBCASE("degenerate walk at huge tau") {
    const double theta[2] = {1e6, 5.0};
    auto x = tasks::sv_simulate(theta, 8);
    // s ~ 0 so x is marginally StudentT_5(0,1): sample sd should be modest
    double m2 = 0;
    for (int64_t i = 0; i < x.size(); ++i) m2 += x[i] * x[i];
    CHECK(m2 / 100.0 < 10.0);
    CHECK(m2 / 100.0 > 0.3);
  }
  SUBCASE("near-gaussian tails at huge nu") {
    // x/exp(s) has excess kurtosis ~ 0 when nu is large; tau huge makes s ~ 0
    const double theta[2] = {1e6, 1e6};
    double m2 = 0, m4 = 0;
    int64_t n = 0;
    for (int rep = 0; rep < 1000; ++rep) {
      auto x = tasks::sv_simulate(theta, 3000 + static_cast<uint64_t>(rep));
      for (int64_t i = 0; i < x.size(); ++i) {
        m2 += x[i] * x[i];
        m4 += x[i] * x[i] * x[i] * x[i];
        ++n;
      }
    }
    m2 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    const double kurt = m4 / (m2 * m2) - 3.0;
    CHECK(std::fabs(kurt) < 0.2);
  }
  SUBCASE("seed reproducibility") {
    const double theta[2] = {0.2, 5.0};
    auto a = tasks::sv_simulate(theta, 99);
    auto b = tasks::sv_simulate(theta, 99);
    for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
  SUBCASE("invalid parameters rejected") {
    const double bad[2] = {-1.0, 5.0};
    CHECK_THROWS_AS(tasks::sv_simulate(bad, 1), std::invalid_argument);
  }
}

TEST_CASE("sv transform window") {
  Array x({100});
  for (int64_t i = 0; i < 100; ++i) x[i] = 2.0;
  auto y0 = tasks::sv_transform(x, 0);
  for (int64_t i = 0; i < 100; ++i) CHECK(y0[i] == 2.0);

  auto y1 = tasks::sv_transform(x, 1);
  CHECK(y1[49] == 10.0);   // 1-based index 50 inside the window
  CHECK(y1[48] == 2.0);    // 1-based index 49 outside
  CHECK(y1[64] == 10.0);   // 1-based index 65 inside
  CHECK(y1[65] == 2.0);    // 1-based index 66 outside

  auto y4 = tasks::sv_transform(x, 4);
  CHECK(y4[55] == 40.0);  // x20
}

TEST_CASE("sv summary matches sort-based oracle") {
  Array c = Array::full({100}, 1.5);
  auto s = tasks::sv_summary(c);
  CHECK(s[0] == 1.5);
  CHECK(s[1] == 0.0);
  CHECK(s[2] == 1.5);
  CHECK(s[3] == 0.0);

  // 100 entries: 1..100 -> median 50.5, MAD = median(|x-50.5|) = 25
  Array ramp({100});
  for (int64_t i = 0; i < 100; ++i) ramp[i] = static_cast<double>(i + 1);
  s = tasks::sv_summary(ramp);
  CHECK(s[2] == doctest::Approx(50.5));
  CHECK(s[3] == doctest::Approx(25.0));

  // symmetric sample: |mean - median| small relative to sd
  auto x = tasks::tg_simulate(0.0, 31);
  s = tasks::sv_summary(x);
  CHECK(std::fabs(s[0] - s[2]) < 0.5 * s[1]);
}

TEST_CASE("slcp simulator covariance") {
  SUBCASE("identity covariance at theta=(0,0,1,1,0)") {
    const double theta[5] = {0, 0, 1, 1, 0};
    double c11 = 0, c22 = 0, c12 = 0, m1 = 0, m2 = 0;
    const int reps = 25000;  // 4 draws each -> 1e5 bivariate samples
    for (int r = 0; r < reps; ++r) {
      auto x = tasks::slcp_simulate(theta, 500 + static_cast<uint64_t>(r));
      for (int d = 0; d < 4; ++d) {
        m1 += x[2 * d];
        m2 += x[2 * d + 1];
        c11 += x[2 * d] * x[2 * d];
        c22 += x[2 * d + 1] * x[2 * d + 1];
        c12 += x[2 * d] * x[2 * d + 1];
      }
    }
    const double n = 4.0 * reps;
    CHECK(std::fabs(m1 / n) < 0.02);
    CHECK(std::fabs(c11 / n - 1.0) < 0.02);
    CHECK(std::fabs(c22 / n - 1.0) < 0.02);
    CHECK(std::fabs(c12 / n) < 0.02);
  }
  SUBCASE("correlation approaches tanh(3)") {
    const double theta[5] = {0, 0, 1, 1, 3};
    double c11 = 0, c22 = 0, c12 = 0;
    const int reps = 25000;
    for (int r = 0; r < reps; ++r) {
      auto x = tasks::slcp_simulate(theta, 90000 + static_cast<uint64_t>(r));
      for (int d = 0; d < 4; ++d) {
        c11 += x[2 * d] * x[2 * d];
        c22 += x[2 * d + 1] * x[2 * d + 1];
        c12 += x[2 * d] * x[2 * d + 1];
      }
    }
    CHECK(c12 / std::sqrt(c11 * c22) == doctest::Approx(std::tanh(3.0)).epsilon(0.02));
  }
  SUBCASE("deterministic given seed") {
    const double theta[5] = {1, -1, 2, 0.5, 0.3};
    auto a = tasks::slcp_simulate(theta, 77);
    auto b = tasks::slcp_simulate(theta, 77);
    for (int64_t i = 0; i < 8; ++i) CHECK(a[i] == b[i]);
  }
  SUBCASE("singular covariance simulates with jitter") {
    const double theta[5] = {0, 0, 0, 1, 0};
    auto x = tasks::slcp_simulate(theta, 3);
    CHECK(x.all_finite());
  }
}

TEST_CASE("slcp loglik matches brute-force bivariate density") {
  core::Rng rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    double theta[5];
    for (auto& v : theta) v = rng.uniform(-3, 3);
    if (std::fabs(theta[2]) < 0.1) theta[2] = 0.5;
    if (std::fabs(theta[3]) < 0.1) theta[3] = -0.5;
    auto y = tasks::slcp_simulate(theta, 200 + static_cast<uint64_t>(rep));
    const double s1 = theta[2] * theta[2], s2 = theta[3] * theta[3], rho = std::tanh(theta[4]);
    double expected = 0.0;
    for (int d = 0; d < 4; ++d) {
      const double d1 = y[2 * d] - theta[0], d2 = y[2 * d + 1] - theta[1];
      const double det = s1 * s1 * s2 * s2 * (1 - rho * rho);
      const double quad =
          (d1 * d1 / (s1 * s1) - 2 * rho * d1 * d2 / (s1 * s2) + d2 * d2 / (s2 * s2)) / (1 - rho * rho);
      expected += -std::log(2 * M_PI) - 0.5 * std::log(det) - 0.5 * quad;
    }
    const double got = tasks::slcp_loglik(theta, y);
    CHECK(std::fabs(got - expected) / std::fabs(expected) < 1e-10);
  }
}

TEST_CASE("slcp transform") {
  Array x = Array::zeros({8});
  Array z({8});
  for (int64_t i = 0; i < 8; ++i) z[i] = 1.0;
  auto y0 = tasks::slcp_transform(x, 0, z);
  for (int64_t i = 0; i < 8; ++i) CHECK(y0[i] == 0.0);
  auto y1 = tasks::slcp_transform(x, 1, z);
  for (int64_t i = 0; i < 8; ++i) CHECK(y1[i] == 100.0);

  // noise variance of y3-x3 at sigma=2 is 2*(200)^2 per coordinate
  auto task = tasks::make_task(tasks::TaskName::SLCP);
  core::Rng rng(55);
  double acc = 0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    auto zr = task.sample_aux(rng);
    auto y = tasks::slcp_transform(x, 2, zr);
    acc += y[4] * y[4];  // first coordinate of the third draw
  }
  CHECK(acc / reps == doctest::Approx(2.0 * 200.0 * 200.0).epsilon(0.05));
}

TEST_CASE("observation grid construction and properties") {
  auto task = tasks::make_task(tasks::TaskName::TG_SS);
  auto grid = tasks::build_observation_grid(task, 50, 2024);
  CHECK(grid.entries.size() == 250);

  // same theta across sigma columns per row; sigma=0 equals summarized output
  for (int i = 0; i < 50; ++i) {
    const auto& base = grid.at(i, 0);
    for (int s = 1; s < 5; ++s) CHECK(grid.at(i, s).theta_true == base.theta_true);
  }
  // determinism
  auto grid2 = tasks::build_observation_grid(task, 50, 2024);
  for (size_t i = 0; i < grid.entries.size(); ++i) {
    CHECK(grid.entries[i].y[0] == grid2.entries[i].y[0]);
    CHECK(grid.entries[i].y[1] == grid2.entries[i].y[1]);
  }
  // different master seed differs
  auto grid3 = tasks::build_observation_grid(task, 50, 2025);
  CHECK(grid3.at(0, 0).y[0] != grid.at(0, 0).y[0]);
}

TEST_CASE("grid ndjson round trip is exact") {
  auto task = tasks::make_task(tasks::TaskName::TG_SS);
  auto grid = tasks::build_observation_grid(task, 3, 5);
  std::stringstream ss;
  tasks::write_grid_ndjson(grid, ss);
  auto back = tasks::read_grid_ndjson(ss);
  REQUIRE(back.entries.size() == grid.entries.size());
  CHECK(back.task_id == grid.task_id);
  for (size_t i = 0; i < grid.entries.size(); ++i) {
    const auto& a = grid.entries[i];
    const auto& b = back.entries[i];
    CHECK(a.index == b.index);
    CHECK(a.sigma == b.sigma);
    CHECK(a.seed_material == b.seed_material);
    REQUIRE(a.y.size() == b.y.size());
    for (int64_t j = 0; j < a.y.size(); ++j) CHECK(a.y[j] == b.y[j]);
    REQUIRE(a.y_ref.size() == b.y_ref.size());
    for (int64_t j = 0; j < a.y_ref.size(); ++j) CHECK(a.y_ref[j] == b.y_ref[j]);
  }
}

TEST_CASE("training set generation is deterministic with matching dims") {
  auto task = tasks::make_task(tasks::TaskName::SLCP);
  auto a = tasks::make_training_set(task, 200, 9);
  auto b = tasks::make_training_set(task, 200, 9);
  CHECK(a.thetas.shape() == std::vector<int64_t>{200, 5});
  CHECK(a.xs.shape() == std::vector<int64_t>{200, 8});
  for (int64_t i = 0; i < a.xs.size(); ++i) CHECK(a.xs[i] == b.xs[i]);
}

TEST_CASE("seed derivation is stable, label- and order-sensitive") {
  using bench::derive_seed;
  const auto s1 = derive_seed(1, {std::string("a"), int64_t{2}});
  CHECK(s1 == derive_seed(1, {std::string("a"), int64_t{2}}));
  CHECK(s1 != derive_seed(1, {std::string("a"), int64_t{3}}));
  CHECK(s1 != derive_seed(2, {std::string("a"), int64_t{2}}));
  CHECK(derive_seed(1, {std::string("a"), std::string("b")}) !=
        derive_seed(1, {std::string("b"), std::string("a")}));
}
