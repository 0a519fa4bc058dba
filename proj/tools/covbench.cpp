// covbench CLI; links the C API only.
#include <cstdio>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "covbench.h"

namespace {

int exit_code_of(cb_status status) {
  switch (status) {
    case CB_OK: return 0;
    case CB_ERR_CONFIG: return 1;
    case CB_ERR_PARTIAL: return 2;
    case CB_ERR_ORACLE: return 3;
    default: return 1;
  }
}

int finish(cb_session* session, cb_status status) {
  if (status != CB_OK) std::fprintf(stderr, "covbench: %s\n", cb_last_error(session));
  return exit_code_of(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coverage benchmark for simulation-based inference under model misspecification"};
  app.require_subcommand(1);

  std::string config_path, out_dir, task;
  bool resume = false;
  int workers = 0;

  auto* run = app.add_subcommand("run", "Execute the benchmark matrix from a TOML config");
  run->add_option("--config", config_path, "TOML configuration file")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_flag("--resume", resume, "Skip cells whose artifacts already exist");
  run->add_option("--workers", workers, "Worker threads (0 = auto; COVBENCH_WORKERS overrides)");

  auto* plot = app.add_subcommand("plot", "Render SVG coverage panels from run artifacts");
  plot->add_option("--out", out_dir, "Run output directory")->required();

  auto* report = app.add_subcommand("report", "Write report.csv and digest.txt from run artifacts");
  report->add_option("--out", out_dir, "Run output directory")->required();

  auto* oracle = app.add_subcommand("oracle", "Run reference-oracle self-tests for one task");
  oracle->add_option("task", task, "Task id: tg, tg_ss, sv, sv_ss or slcp")->required();

  app.add_subcommand("selftest", "Run the quick invariant suite over the numerical core");

  app.set_version_flag("--version", [] { return std::string(cb_version()); });
  CLI11_PARSE(app, argc, argv);

  std::unique_ptr<cb_session, void (*)(cb_session*)> session(cb_session_new(), cb_session_free);

  if (run->parsed())
    return finish(session.get(), cb_run(session.get(), config_path.c_str(), out_dir.c_str(),
                                        resume ? 1 : 0, workers));
  if (plot->parsed()) return finish(session.get(), cb_plot(session.get(), out_dir.c_str()));
  if (report->parsed()) return finish(session.get(), cb_report(session.get(), out_dir.c_str()));
  if (oracle->parsed()) return finish(session.get(), cb_oracle_selftest(session.get(), task.c_str()));
  return finish(session.get(), cb_selftest(session.get()));
}
