#pragma once

#include <string>

namespace covbench::bench {

struct ReportSummary {
  int rows = 0;
  int flagged_cells = 0;
};

// Writes report.csv (one diagonal-deviation row per curve) and digest.txt
// (per cell: signed area by sigma and whether coverage degrades
// monotonically; flagged cells listed) from the artifacts in out_dir.
ReportSummary emit_report(const std::string& out_dir);

}  // namespace covbench::bench
