#pragma once

#include <string>

#include "bench/config.hpp"

namespace covbench::bench {

struct RunOptions {
  std::string out_dir;
  bool resume = false;
  int workers_override = 0;
  // Testing hook: stop after this many executed cells (-1 = no limit),
  // simulating an interrupted run.
  int64_t max_cells = -1;
};

struct RunSummary {
  int cells_total = 0;
  int cells_run = 0;
  int cells_skipped = 0;
  int cells_failed = 0;
  int flagged_curves = 0;

  bool ok() const { return cells_failed == 0; }
};

// Executes the benchmark matrix: per cell, train the per-seed estimators (or
// build ABC posteriors), evaluate coverage curves against every configured
// sigma column, and persist artifacts. Completed cells are skipped on
// resume. curves.csv is reassembled deterministically from the artifacts.
RunSummary run_matrix(const BenchConfig& cfg, const RunOptions& opt);

// Rebuilds curves.csv from the cell artifacts in out_dir.
void assemble_curves_csv(const std::string& out_dir);

}  // namespace covbench::bench
