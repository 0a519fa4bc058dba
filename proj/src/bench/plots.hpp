#pragma once

#include <string>

namespace covbench::bench {

struct PlotSummary {
  int files_written = 0;
  int missing_panels = 0;

  bool complete() const { return missing_panels == 0; }
};

// Renders one SVG panel grid per (task, n_train) from the cell artifacts:
// columns are sigma levels, rows are algorithm/variant combinations, each
// panel shows the diagonal, thin per-seed curves, the thick ensemble curve
// and its bootstrap band. Output bytes depend only on the artifacts. Throws
// when no artifacts exist.
PlotSummary emit_plots(const std::string& out_dir);

}  // namespace covbench::bench
