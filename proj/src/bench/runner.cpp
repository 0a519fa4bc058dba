#include "bench/runner.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "bench/seeding.hpp"
#include "bench/workers.hpp"
#include "inference/abc.hpp"
#include "inference/posterior.hpp"
#include "metrics/coverage.hpp"
#include "optim/train.hpp"

namespace covbench::bench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << content;
  }
  fs::rename(tmp, path);
}

struct Cell {
  tasks::TaskName task;
  Algorithm alg;
  Variant variant;
  int64_t n_train;

  std::string key() const {
    std::ostringstream os;
    os << tasks::task_to_string(task) << "_" << algorithm_to_string(alg) << "_"
       << variant_to_string(variant) << "_n" << n_train;
    return os.str();
  }
};

// Reference draw table for one task: per (sigma, observation), the cached
// posterior draws or nullopt when the oracle failed.
struct RefTable {
  std::map<int, std::vector<std::optional<ad::Array>>> by_sigma;
};

fs::path ref_cache_path(const fs::path& out, const BenchConfig& cfg, const tasks::Task& task, int obs,
                        int sigma) {
  const uint64_t key = derive_seed(cfg.master_seed,
                                   {std::string("ref-cache"), task.id, static_cast<int64_t>(obs),
                                    static_cast<int64_t>(sigma), static_cast<int64_t>(cfg.n_ref_cache),
                                    static_cast<int64_t>(cfg.oracle_chains),
                                    static_cast<int64_t>(cfg.oracle_keep)});
  return out / "ref_cache" / (hex64(key) + ".bin");
}

std::optional<ad::Array> load_ref_cache(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  uint32_t magic = 0;
  int64_t rows = 0, cols = 0;
  is.read(reinterpret_cast<char*>(&magic), sizeof(magic));
  is.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  is.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!is || magic != 0x43524546u || rows < 0 || cols <= 0) return std::nullopt;
  ad::Array a({rows, cols});
  is.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
  if (!is) return std::nullopt;
  return a;
}

void save_ref_cache(const fs::path& path, const ad::Array& a) {
  std::ostringstream os;
  const uint32_t magic = 0x43524546u;
  const int64_t rows = a.rows(), cols = a.cols();
  os.write(reinterpret_cast<const char*>(&magic), sizeof(magic));
  os.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  os.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  os.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
  atomic_write(path, os.str());
}

RefTable build_ref_table(const fs::path& out, const BenchConfig& cfg, const tasks::Task& task,
                         const tasks::ObservationGrid& grid, int workers, int* excluded) {
  RefTable table;
  for (int sigma : cfg.sigmas)
    table.by_sigma[sigma].resize(static_cast<size_t>(cfg.n_obs));
  struct Job {
    int sigma;
    int obs;
  };
  std::vector<Job> jobs;
  for (int sigma : cfg.sigmas)
    for (int i = 0; i < cfg.n_obs; ++i) jobs.push_back({sigma, i});
  std::mutex mu;
  parallel_for(static_cast<int64_t>(jobs.size()), workers, [&](int64_t j) {
    const auto [sigma, i] = jobs[static_cast<size_t>(j)];
    const fs::path path = ref_cache_path(out, cfg, task, i, sigma);
    if (auto cached = load_ref_cache(path)) {
      table.by_sigma[sigma][static_cast<size_t>(i)] = std::move(*cached);
      return;
    }
    const auto& obs = grid.at(i, sigma);
    try {
      ad::Array draws = task.reference.sample(
          obs.y_ref, cfg.n_ref_cache,
          derive_seed(cfg.master_seed, {std::string("ref"), task.id, static_cast<int64_t>(i),
                                        static_cast<int64_t>(sigma)}));
      save_ref_cache(path, draws);
      table.by_sigma[sigma][static_cast<size_t>(i)] = std::move(draws);
    } catch (const tasks::OracleError&) {
      std::lock_guard<std::mutex> lock(mu);
      *excluded += 1;  // left as nullopt: the observation is excluded
    }
  });
  return table;
}

// ABC posteriors are observation-specific; this wrapper builds and caches the
// per-observation KDE behind the uniform Posterior interface.
inference::Posterior abc_lazy_posterior(std::shared_ptr<const inference::AbcSimTable> table,
                                        double acceptance_rate) {
  struct Cache {
    std::mutex mu;
    std::map<std::string, std::shared_ptr<inference::Posterior>> by_y;
  };
  auto cache = std::make_shared<Cache>();
  auto get = [table, acceptance_rate, cache](const ad::Array& y) {
    std::string key(reinterpret_cast<const char*>(y.data()), static_cast<size_t>(y.size()) * sizeof(double));
    {
      std::lock_guard<std::mutex> lock(cache->mu);
      auto it = cache->by_y.find(key);
      if (it != cache->by_y.end()) return it->second;
    }
    auto post = std::make_shared<inference::Posterior>(
        inference::abc_posterior(inference::abc_rejection(*table, y, acceptance_rate)));
    std::lock_guard<std::mutex> lock(cache->mu);
    return cache->by_y.emplace(key, post).first->second;
  };
  inference::Posterior p;
  p.kind = inference::Posterior::Kind::ABC_KDE;
  p.theta_dim = static_cast<int>(table->thetas.cols());
  p.unnorm_logpdf = [get](std::span<const double> th, const ad::Array& y) {
    return get(y)->unnorm_logpdf(th, y);
  };
  p.unnorm_logpdf_rows = [get](const ad::Array& thetas, const ad::Array& y) {
    return get(y)->unnorm_logpdf_rows(thetas, y);
  };
  p.sample = [get](const ad::Array& y, int n, uint64_t seed) { return get(y)->sample(y, n, seed); };
  return p;
}

json curve_to_json(const metrics::CoverageCurve& c, const std::string& est_id, int sigma) {
  json rec;
  rec["seed_or_ensemble_id"] = est_id;
  rec["sigma"] = sigma;
  rec["alpha"] = c.alpha;
  rec["nominal"] = c.nominal;
  rec["empirical"] = c.empirical;
  rec["band_lo"] = c.band_lo;
  rec["band_hi"] = c.band_hi;
  rec["n_obs"] = c.n_obs;
  rec["m_ref"] = c.n_ref_per_obs;
  rec["k_density"] = c.k_density;
  rec["flagged_observations"] = c.flagged_observations;
  rec["excluded_observations"] = c.excluded_observations;
  return rec;
}

struct CellResult {
  json artifact;
  int flagged_curves = 0;
};

CellResult run_cell(const BenchConfig& cfg, const Cell& cell, const tasks::Task& task,
                    const tasks::ObservationGrid& grid, const RefTable& refs, const fs::path& out,
                    bool resume, int workers) {
  CellResult result;
  const std::string key = cell.key();
  const uint64_t dataset_seed =
      derive_seed(cfg.master_seed, {std::string("dataset"), task.id, cell.n_train});

  std::vector<inference::Posterior> posteriors;
  json train_logs = json::array();

  inference::PosteriorMcmcConfig pm;
  pm.chains = cfg.mcmc_chains;
  pm.keep_per_chain = cfg.mcmc_keep;
  pm.rhat_threshold = cfg.rhat_threshold;

  if (cell.alg == Algorithm::ABC) {
    for (int s = 0; s < cfg.n_seeds; ++s) {
      auto table = std::make_shared<inference::AbcSimTable>(inference::abc_simulate_table(
          task, cfg.abc_n_total,
          derive_seed(cfg.master_seed, {std::string("abc-table"), task.id, static_cast<int64_t>(s)})));
      posteriors.push_back(abc_lazy_posterior(table, cfg.abc_acceptance_rate));
    }
  } else {
    core::Dataset data = tasks::make_training_set(task, cell.n_train, dataset_seed);
    const est::EstimatorKind kind = est::kind_from_string(algorithm_to_string(cell.alg));
    std::vector<std::shared_ptr<est::Estimator>> trained(static_cast<size_t>(cfg.n_seeds));
    std::vector<json> logs(static_cast<size_t>(cfg.n_seeds));
    parallel_for(cfg.n_seeds, workers, [&](int64_t s) {
      const fs::path est_path = out / "estimators" / (key + "_s" + std::to_string(s) + ".bin");
      if (resume && fs::exists(est_path)) {
        trained[static_cast<size_t>(s)] = est::Estimator::load_file(est_path.string());
        logs[static_cast<size_t>(s)] = {{"seed", s}, {"loaded", true}};
        return;
      }
      const uint64_t train_seed = derive_seed(
          cfg.master_seed, {std::string("train"), key, static_cast<int64_t>(s)});
      auto e = est::Estimator::make(kind, task.theta_dim, task.x_dim, train_seed, cfg.flow_config(),
                                    cfg.nre_config());
      e->fit_standardizers(data);
      optim::TrainConfig tc;
      tc.batch_size = cfg.batch_size;
      tc.validation_fraction = cfg.validation_fraction;
      tc.patience = cfg.patience;
      tc.max_epochs = cfg.max_epochs;
      tc.sam_enabled = cell.variant == Variant::Sam;
      tc.sam_radius = cfg.sam_rho;
      tc.sam_same_batch = cfg.sam_same_batch;
      tc.seed = train_seed;
      tc.adam.lr = cfg.learning_rate;
      tc.adam.weight_decay = cfg.weight_decay;
      auto log = optim::train(*e, data, tc);
      {
        std::ostringstream os;
        e->save(os);
        atomic_write(est_path, os.str());
      }
      logs[static_cast<size_t>(s)] = {{"seed", s},
                                      {"epochs", log.epochs_run},
                                      {"best_epoch", log.best_epoch},
                                      {"best_val_loss", log.best_val_loss}};
      // per-epoch log lines: {epoch, train_loss, val_loss, improved}
      json epochs = json::array();
      for (const auto& ep : log.epochs)
        epochs.push_back({{"epoch", ep.epoch},
                          {"train_loss", ep.train_loss},
                          {"val_loss", ep.val_loss},
                          {"improved", ep.improved}});
      logs[static_cast<size_t>(s)]["log"] = std::move(epochs);
      trained[static_cast<size_t>(s)] = std::move(e);
    });
    for (int s = 0; s < cfg.n_seeds; ++s) {
      train_logs.push_back(logs[static_cast<size_t>(s)]);
      std::shared_ptr<const est::Estimator> e = trained[static_cast<size_t>(s)];
      switch (cell.alg) {
        case Algorithm::NPE: posteriors.push_back(inference::npe_posterior(e)); break;
        case Algorithm::NLE: posteriors.push_back(inference::nle_posterior(e, task.prior, pm)); break;
        case Algorithm::NRE: posteriors.push_back(inference::nre_posterior(e, task.prior, pm)); break;
        default: break;
      }
    }
  }

  inference::EnsembleConfig ec;
  ec.normalize = cfg.ensemble_normalize;
  ec.is_draws = cfg.ensemble_is_draws;
  ec.is_seed = derive_seed(cfg.master_seed, {std::string("ensemble-is"), key});
  inference::Posterior mixture = inference::ensemble(posteriors, task.prior, ec);

  json curves = json::array();
  metrics::CoverageConfig mc;
  mc.alpha_grid = cfg.alpha_levels();
  mc.m_ref = cfg.m_ref;
  mc.k_density = cfg.k_density;
  mc.bootstrap_resamples = cfg.bootstrap_resamples;
  mc.workers = workers;

  for (int sigma : cfg.sigmas) {
    auto column = grid.column(sigma);
    const auto& ref_col = refs.by_sigma.at(sigma);
    metrics::RefProvider provider = [&ref_col](int obs_index,
                                               const tasks::Observation&) -> std::optional<ad::Array> {
      return ref_col[static_cast<size_t>(obs_index)];
    };
    for (int s = 0; s <= cfg.n_seeds; ++s) {
      const bool is_ensemble = s == cfg.n_seeds;
      const std::string est_id =
          is_ensemble ? ("ensemble-" + variant_to_string(cell.variant)) : std::to_string(s);
      const inference::Posterior& q = is_ensemble ? mixture : posteriors[static_cast<size_t>(s)];
      mc.seed = derive_seed(cfg.master_seed,
                            {std::string("coverage"), key, static_cast<int64_t>(sigma), est_id});
      auto curve = metrics::coverage_curve(q, column, provider, mc);
      if (curve.flagged_observations > 0) result.flagged_curves += 1;
      json rec = curve_to_json(curve, est_id, sigma);
      rec["variant"] = is_ensemble ? "ensemble" : variant_to_string(cell.variant);
      curves.push_back(std::move(rec));
    }
  }

  result.artifact["schema"] = 1;
  result.artifact["cell"] = {{"task", task.id},
                             {"algorithm", algorithm_to_string(cell.alg)},
                             {"variant", variant_to_string(cell.variant)},
                             {"n_train", cell.n_train}};
  result.artifact["curves"] = std::move(curves);
  result.artifact["train_logs"] = std::move(train_logs);
  result.artifact["flagged_curves"] = result.flagged_curves;
  return result;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void assemble_curves_csv(const std::string& out_dir) {
  const fs::path dir = fs::path(out_dir) / "curves";
  struct Row {
    std::string task, algorithm, variant, est_id;
    int sigma;
    int64_t n_train;
    double alpha, nominal, empirical, band_lo, band_hi;
  };
  std::vector<Row> rows;
  if (fs::exists(dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::ifstream is(file);
      json artifact = json::parse(is);
      const auto& cell = artifact.at("cell");
      for (const auto& curve : artifact.at("curves")) {
        const auto& alpha = curve.at("alpha");
        for (size_t i = 0; i < alpha.size(); ++i) {
          Row r;
          r.task = cell.at("task").get<std::string>();
          r.algorithm = cell.at("algorithm").get<std::string>();
          r.variant = curve.at("variant").get<std::string>();
          r.est_id = curve.at("seed_or_ensemble_id").get<std::string>();
          r.sigma = curve.at("sigma").get<int>();
          r.n_train = cell.at("n_train").get<int64_t>();
          r.alpha = alpha[i].get<double>();
          r.nominal = curve.at("nominal")[i].get<double>();
          r.empirical = curve.at("empirical")[i].get<double>();
          r.band_lo = curve.at("band_lo")[i].get<double>();
          r.band_hi = curve.at("band_hi")[i].get<double>();
          rows.push_back(std::move(r));
        }
      }
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.task, a.algorithm, a.variant, a.sigma, a.n_train, a.est_id, a.alpha) <
           std::tie(b.task, b.algorithm, b.variant, b.sigma, b.n_train, b.est_id, b.alpha);
  });
  std::ostringstream os;
  os << "task,algorithm,variant,sigma,n_train,seed_or_ensemble_id,alpha,nominal,empirical,band_lo,band_hi\n";
  for (const auto& r : rows) {
    os << r.task << "," << r.algorithm << "," << r.variant << "," << r.sigma << "," << r.n_train << ","
       << r.est_id << "," << format_double(r.alpha) << "," << format_double(r.nominal) << ","
       << format_double(r.empirical) << "," << format_double(r.band_lo) << "," << format_double(r.band_hi)
       << "\n";
  }
  atomic_write(fs::path(out_dir) / "curves.csv", os.str());
}

RunSummary run_matrix(const BenchConfig& cfg, const RunOptions& opt) {
  if (opt.out_dir.empty()) throw ConfigError("output directory must be set");
  const fs::path out = opt.out_dir;
  for (const char* sub : {"", "grids", "ref_cache", "estimators", "curves", "plots"})
    fs::create_directories(out / sub);

  const int workers = opt.workers_override > 0
                          ? opt.workers_override
                          : (cfg.workers > 0 ? cfg.workers : default_workers());
  const std::string config_hash = hex64(cfg.result_hash());

  RunSummary summary;
  std::ofstream run_log(out / "runs.ndjson", std::ios::app);

  // Cells in deterministic order.
  std::vector<Cell> cells;
  for (auto t : cfg.task_names)
    for (auto a : cfg.algorithms)
      for (auto v : cfg.variants) {
        if (a == Algorithm::ABC && v == Variant::Sam) continue;  // SAM never pairs with ABC
        for (auto n : cfg.n_train) cells.push_back({t, a, v, n});
      }
  summary.cells_total = static_cast<int>(cells.size());

  // Task setup: grids and reference tables are shared across cells.
  tasks::McmcOracleConfig ocfg;
  ocfg.chains = cfg.oracle_chains;
  ocfg.keep_per_chain = cfg.oracle_keep;
  ocfg.rhat_threshold = cfg.rhat_threshold;
  std::map<tasks::TaskName, tasks::Task> task_objs;
  std::map<tasks::TaskName, tasks::ObservationGrid> grids;
  std::map<tasks::TaskName, RefTable> ref_tables;
  for (auto name : cfg.task_names) {
    tasks::Task task = tasks::make_task(name, ocfg);
    tasks::ObservationGrid grid = tasks::build_observation_grid(task, cfg.n_obs, cfg.master_seed);
    const fs::path grid_path = out / "grids" / (task.id + ".ndjson");
    if (!fs::exists(grid_path)) {
      std::ostringstream os;
      tasks::write_grid_ndjson(grid, os);
      atomic_write(grid_path, os.str());
    }
    int excluded = 0;
    ref_tables[name] = build_ref_table(out, cfg, task, grid, workers, &excluded);
    grids[name] = std::move(grid);
    task_objs[name] = std::move(task);
  }

  int64_t executed = 0;
  for (const auto& cell : cells) {
    const std::string key = cell.key();
    const fs::path artifact_path = out / "curves" / (key + ".json");
    if (opt.resume && fs::exists(artifact_path)) {
      std::ifstream is(artifact_path);
      try {
        json existing = json::parse(is);
        if (existing.value("config_hash", "") == config_hash) {
          summary.cells_skipped += 1;
          continue;
        }
      } catch (...) {
        // unreadable artifact: recompute
      }
    }
    if (opt.max_cells >= 0 && executed >= opt.max_cells) break;
    ++executed;

    const auto t0 = std::chrono::steady_clock::now();
    json record = {{"cell", key}, {"config_hash", config_hash}};
    try {
      auto result = run_cell(cfg, cell, task_objs.at(cell.task), grids.at(cell.task),
                             ref_tables.at(cell.task), out, opt.resume, workers);
      result.artifact["config_hash"] = config_hash;
      atomic_write(artifact_path, result.artifact.dump(2) + "\n");
      summary.cells_run += 1;
      summary.flagged_curves += result.flagged_curves;
      record["status"] = result.flagged_curves > 0 ? "mcmc_flagged" : "ok";
      record["artifact"] = artifact_path.string();
    } catch (const std::exception& e) {
      summary.cells_failed += 1;
      record["status"] = "failed";
      record["error"] = e.what();
    }
    record["wall_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    run_log << record.dump() << "\n";
    run_log.flush();
  }

  assemble_curves_csv(opt.out_dir);
  return summary;
}

}  // namespace covbench::bench
