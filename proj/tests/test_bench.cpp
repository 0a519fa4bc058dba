#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "bench/config.hpp"
#include "bench/plots.hpp"
#include "bench/report.hpp"
#include "bench/runner.hpp"
#include "bench/seeding.hpp"
#include "bench/workers.hpp"

using namespace covbench;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const char* kMiniConfig = R"(
tasks = ["tg_ss"]
algorithms = ["npe", "abc"]
variants = ["plain"]
n_train = [1000]
sigmas = [0, 1, 2, 3, 4]
n_obs = 6
n_seeds = 2
master_seed = 777

[metrics]
m_ref = 20
k_density = 300
bootstrap_resamples = 100
n_ref_cache = 64

[train]
patience = 5
max_epochs = 15

[abc]
n_total = 20000
acceptance_rate = 0.01

[ensemble]
is_draws = 500
)";

}  // namespace

TEST_CASE("toml parsing covers the value kinds and rejects malformed input") {
  auto kv = bench::parse_toml(R"(
# comment
name = "hello" # trailing
flag = true
count = 12_000
rate = 1.5e-3
ints = [1, 2, 3]
reals = [0.1, 2]
strs = ["a", "b"]
[section]
key = 7
[other.deep]
key = "x"
)");
  CHECK(std::get<std::string>(kv.at("name")) == "hello");
  CHECK(std::get<bool>(kv.at("flag")) == true);
  CHECK(std::get<int64_t>(kv.at("count")) == 12000);
  CHECK(std::get<double>(kv.at("rate")) == doctest::Approx(1.5e-3));
  CHECK(std::get<std::vector<int64_t>>(kv.at("ints")).size() == 3);
  CHECK(std::get<std::vector<double>>(kv.at("reals"))[1] == 2.0);
  CHECK(std::get<std::vector<std::string>>(kv.at("strs"))[1] == "b");
  CHECK(std::get<int64_t>(kv.at("section.key")) == 7);
  CHECK(std::get<std::string>(kv.at("other.deep.key")) == "x");

  CHECK_THROWS_AS(bench::parse_toml("key"), bench::ConfigError);
  CHECK_THROWS_AS(bench::parse_toml("a = [1, \"x\"]"), bench::ConfigError);
  CHECK_THROWS_AS(bench::parse_toml("a = 1\na = 2"), bench::ConfigError);
  CHECK_THROWS_AS(bench::parse_toml("a = "), bench::ConfigError);
}

TEST_CASE("bench config validation") {
  auto cfg = bench::BenchConfig::from_toml_text(kMiniConfig);
  CHECK(cfg.task_names.size() == 1);
  CHECK(cfg.algorithms.size() == 2);
  CHECK(cfg.n_obs == 6);
  CHECK(cfg.alpha_levels().size() == 19);

  CHECK_THROWS_AS(bench::BenchConfig::from_toml_text("tasks = []"), bench::ConfigError);
  CHECK_THROWS_AS(bench::BenchConfig::from_toml_text("sigmas = [7]"), bench::ConfigError);
  CHECK_THROWS_AS(bench::BenchConfig::from_toml_text("unknown_key = 1"), bench::ConfigError);
  // SAM never pairs with ABC alone
  CHECK_THROWS_AS(
      bench::BenchConfig::from_toml_text("algorithms = [\"abc\"]\nvariants = [\"sam\"]"),
      bench::ConfigError);

  // result hash is sensitive to any knob
  auto cfg2 = cfg;
  cfg2.k_density += 1;
  CHECK(cfg.result_hash() != cfg2.result_hash());
  auto cfg3 = cfg;
  cfg3.learning_rate *= 1.0000001;
  CHECK(cfg.result_hash() != cfg3.result_hash());
  CHECK(cfg.result_hash() == bench::BenchConfig::from_toml_text(kMiniConfig).result_hash());
}

TEST_CASE("seed derivation shows no collisions over 1e6 paths") {
  std::set<uint64_t> seen;
  for (int64_t a = 0; a < 100; ++a)
    for (int64_t b = 0; b < 100; ++b)
      for (int64_t c = 0; c < 100; ++c)
        seen.insert(bench::derive_seed(1, {a, b, c}));
  CHECK(seen.size() == 1000000);
}

TEST_CASE("parallel_for runs every index exactly once and propagates errors") {
  std::vector<int> counts(500, 0);
  bench::parallel_for(500, 4, [&](int64_t i) { counts[static_cast<size_t>(i)] += 1; });
  for (int c : counts) CHECK(c == 1);  // disjoint slots, no synchronization needed
  CHECK_THROWS_AS(bench::parallel_for(10, 4,
                                      [](int64_t i) {
                                        if (i == 7) throw std::runtime_error("boom");
                                      }),
                  std::runtime_error);
}

TEST_CASE("mini matrix: determinism, resume, plots and report") {
  const fs::path base = fs::temp_directory_path() / "covbench_test_matrix";
  fs::remove_all(base);
  fs::create_directories(base);
  auto cfg = bench::BenchConfig::from_toml_text(kMiniConfig);

  // full run A
  bench::RunOptions opt_a;
  opt_a.out_dir = (base / "a").string();
  opt_a.workers_override = 2;
  auto sum_a = bench::run_matrix(cfg, opt_a);
  CHECK(sum_a.cells_total == 2);
  CHECK(sum_a.cells_run == 2);
  CHECK(sum_a.ok());
  REQUIRE(fs::exists(base / "a" / "curves.csv"));

  // expected artifact inventory: 2 cells, (2 seeds + ensemble) x 5 sigmas each
  for (const char* cell : {"tg_ss_npe_plain_n1000", "tg_ss_abc_plain_n1000"}) {
    std::ifstream is(base / "a" / "curves" / (std::string(cell) + ".json"));
    REQUIRE(is.good());
    std::stringstream ss;
    ss << is.rdbuf();
    CHECK(ss.str().find("\"sigma\": 4") != std::string::npos);
  }

  // full run B: byte-identical CSV
  bench::RunOptions opt_b = opt_a;
  opt_b.out_dir = (base / "b").string();
  opt_b.workers_override = 1;  // concurrency must not affect results
  auto sum_b = bench::run_matrix(cfg, opt_b);
  CHECK(sum_b.cells_run == 2);
  CHECK(slurp(base / "a" / "curves.csv") == slurp(base / "b" / "curves.csv"));

  // interrupted run C: stop after one cell, then resume
  bench::RunOptions opt_c = opt_a;
  opt_c.out_dir = (base / "c").string();
  opt_c.max_cells = 1;
  auto sum_c1 = bench::run_matrix(cfg, opt_c);
  CHECK(sum_c1.cells_run == 1);
  opt_c.max_cells = -1;
  opt_c.resume = true;
  auto sum_c2 = bench::run_matrix(cfg, opt_c);
  CHECK(sum_c2.cells_skipped == 1);
  CHECK(sum_c2.cells_run == 1);
  CHECK(slurp(base / "a" / "curves.csv") == slurp(base / "c" / "curves.csv"));

  // resume on a completed directory retrains nothing
  auto sum_resume = bench::run_matrix(cfg, [&] {
    auto o = opt_a;
    o.resume = true;
    return o;
  }());
  CHECK(sum_resume.cells_run == 0);
  CHECK(sum_resume.cells_skipped == 2);
  CHECK(slurp(base / "a" / "curves.csv") == slurp(base / "b" / "curves.csv"));

  // a changed knob invalidates the resume hash
  auto cfg_changed = cfg;
  cfg_changed.k_density = 400;
  auto sum_changed = bench::run_matrix(cfg_changed, [&] {
    auto o = opt_a;
    o.resume = true;
    o.max_cells = 0;  // only inspect skip behavior, execute nothing
    return o;
  }());
  CHECK(sum_changed.cells_skipped == 0);

  // plots: deterministic bytes, complete panels
  auto plots_a = bench::emit_plots(opt_a.out_dir);
  CHECK(plots_a.files_written == 1);
  CHECK(plots_a.missing_panels == 0);
  const std::string svg_a = slurp(base / "a" / "plots" / "tg_ss_n1000.svg");
  auto plots_b = bench::emit_plots(opt_b.out_dir);
  CHECK(plots_b.files_written == 1);
  CHECK(svg_a == slurp(base / "b" / "plots" / "tg_ss_n1000.svg"));
  CHECK(svg_a.find("missing") == std::string::npos);
  CHECK(svg_a.find("sigma=4") != std::string::npos);

  // report: one row per curve, digest present
  auto rep = bench::emit_report(opt_a.out_dir);
  CHECK(rep.rows == 2 * 5 * 3);  // 2 cells x 5 sigmas x (2 seeds + ensemble)
  const std::string report_csv = slurp(base / "a" / "report.csv");
  CHECK(static_cast<int>(std::count(report_csv.begin(), report_csv.end(), '\n')) == rep.rows + 1);
  const std::string digest = slurp(base / "a" / "digest.txt");
  CHECK(digest.find("tg_ss npe/plain") != std::string::npos);

  // plotting an empty directory is an error
  CHECK_THROWS_AS(bench::emit_plots((base / "empty").string()), std::runtime_error);

  fs::remove_all(base);
}
