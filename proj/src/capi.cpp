#include "covbench.h"

#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "bench/config.hpp"
#include "bench/plots.hpp"
#include "bench/report.hpp"
#include "bench/runner.hpp"
#include "bench/seeding.hpp"
#include "bench/selftest.hpp"

struct cb_session {
  std::string last_error;
};

namespace {

cb_status fail(cb_session* s, cb_status code, const std::string& message) {
  if (s) s->last_error = message;
  return code;
}

template <typename Fn>
cb_status guarded(cb_session* s, Fn&& fn) {
  if (s) s->last_error.clear();
  try {
    return fn();
  } catch (const covbench::bench::ConfigError& e) {
    return fail(s, CB_ERR_CONFIG, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(s, CB_ERR_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(s, CB_ERR_CONFIG, e.what());
  } catch (const std::exception& e) {
    return fail(s, CB_ERR_INTERNAL, e.what());
  }
}

}  // namespace

extern "C" {

cb_session* cb_session_new(void) { return new cb_session(); }

void cb_session_free(cb_session* session) { delete session; }

const char* cb_last_error(const cb_session* session) {
  return session ? session->last_error.c_str() : "";
}

const char* cb_version(void) { return "covbench 1.0.0"; }

cb_status cb_run(cb_session* session, const char* config_path, const char* out_dir, int resume,
                 int workers) {
  if (!config_path || !out_dir) return fail(session, CB_ERR_CONFIG, "config_path and out_dir required");
  return guarded(session, [&] {
    auto cfg = covbench::bench::BenchConfig::from_toml_file(config_path);
    covbench::bench::RunOptions opt;
    opt.out_dir = out_dir;
    opt.resume = resume != 0;
    opt.workers_override = workers;
    auto summary = covbench::bench::run_matrix(cfg, opt);
    if (!summary.ok())
      return fail(session, CB_ERR_PARTIAL,
                  std::to_string(summary.cells_failed) + " of " + std::to_string(summary.cells_total) +
                      " cells failed");
    return CB_OK;
  });
}

cb_status cb_plot(cb_session* session, const char* out_dir) {
  if (!out_dir) return fail(session, CB_ERR_CONFIG, "out_dir required");
  return guarded(session, [&] {
    auto summary = covbench::bench::emit_plots(out_dir);
    if (!summary.complete())
      return fail(session, CB_ERR_PARTIAL,
                  std::to_string(summary.missing_panels) + " panel(s) missing");
    return CB_OK;
  });
}

cb_status cb_report(cb_session* session, const char* out_dir) {
  if (!out_dir) return fail(session, CB_ERR_CONFIG, "out_dir required");
  return guarded(session, [&] {
    covbench::bench::emit_report(out_dir);
    return CB_OK;
  });
}

cb_status cb_oracle_selftest(cb_session* session, const char* task) {
  if (!task) return fail(session, CB_ERR_CONFIG, "task name required");
  return guarded(session, [&]() -> cb_status {
    bool ok;
    try {
      ok = covbench::bench::oracle_selftest(task, std::cout);
    } catch (const std::invalid_argument& e) {
      return fail(session, CB_ERR_CONFIG, e.what());
    }
    if (!ok) return fail(session, CB_ERR_ORACLE, std::string("oracle self-test failed for ") + task);
    return CB_OK;
  });
}

cb_status cb_selftest(cb_session* session) {
  return guarded(session, [&]() -> cb_status {
    if (!covbench::bench::invariant_selftest(std::cout))
      return fail(session, CB_ERR_ORACLE, "invariant self-test failed");
    return CB_OK;
  });
}

uint64_t cb_derive_seed(uint64_t master_seed, const char* const* labels, size_t n_labels) {
  std::vector<covbench::bench::SeedLabel> ls;
  ls.reserve(n_labels);
  for (size_t i = 0; i < n_labels; ++i) ls.emplace_back(std::string(labels[i] ? labels[i] : ""));
  return covbench::bench::derive_seed(master_seed, ls);
}

}  // extern "C"
