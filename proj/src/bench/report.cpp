#include "bench/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "metrics/coverage.hpp"

namespace covbench::bench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    os << content;
  }
  fs::rename(tmp, path);
}

}  // namespace

ReportSummary emit_report(const std::string& out_dir) {
  const fs::path dir = fs::path(out_dir) / "curves";
  std::vector<fs::path> files;
  if (fs::exists(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  ReportSummary summary;
  struct Row {
    std::string task, algorithm, variant, est_id;
    int sigma;
    int64_t n_train;
    metrics::DiagonalDeviation dev;
    int flagged, excluded;
  };
  std::vector<Row> rows;
  // ensemble signed areas per cell, by sigma, for the monotonicity digest
  std::map<std::string, std::map<int, double>> cell_area;
  std::vector<std::string> flagged_cells;

  for (const auto& file : files) {
    std::ifstream is(file);
    json artifact = json::parse(is);
    const auto& cell = artifact.at("cell");
    const std::string cell_name = cell.at("task").get<std::string>() + " " +
                                  cell.at("algorithm").get<std::string>() + "/" +
                                  cell.at("variant").get<std::string>() + " n_train=" +
                                  std::to_string(cell.at("n_train").get<int64_t>());
    if (artifact.value("flagged_curves", 0) > 0) {
      flagged_cells.push_back(cell_name);
      summary.flagged_cells += 1;
    }
    for (const auto& curve : artifact.at("curves")) {
      metrics::CoverageCurve c;
      c.alpha = curve.at("alpha").get<std::vector<double>>();
      c.nominal = curve.at("nominal").get<std::vector<double>>();
      c.empirical = curve.at("empirical").get<std::vector<double>>();
      c.band_lo = curve.at("band_lo").get<std::vector<double>>();
      c.band_hi = curve.at("band_hi").get<std::vector<double>>();
      Row r;
      r.task = cell.at("task").get<std::string>();
      r.algorithm = cell.at("algorithm").get<std::string>();
      r.variant = curve.at("variant").get<std::string>();
      r.est_id = curve.at("seed_or_ensemble_id").get<std::string>();
      r.sigma = curve.at("sigma").get<int>();
      r.n_train = cell.at("n_train").get<int64_t>();
      r.dev = metrics::diagonal_deviation(c);
      r.flagged = curve.value("flagged_observations", 0);
      r.excluded = curve.value("excluded_observations", 0);
      if (r.variant == "ensemble") cell_area[cell_name][r.sigma] = r.dev.signed_area;
      rows.push_back(std::move(r));
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.task, a.algorithm, a.variant, a.sigma, a.n_train, a.est_id) <
           std::tie(b.task, b.algorithm, b.variant, b.sigma, b.n_train, b.est_id);
  });

  std::ostringstream csv;
  csv << "task,algorithm,variant,sigma,n_train,seed_or_ensemble_id,max_below,max_above,signed_area,"
         "flagged_observations,excluded_observations\n";
  for (const auto& r : rows) {
    csv << r.task << "," << r.algorithm << "," << r.variant << "," << r.sigma << "," << r.n_train << ","
        << r.est_id << "," << fmt(r.dev.max_below) << "," << fmt(r.dev.max_above) << ","
        << fmt(r.dev.signed_area) << "," << r.flagged << "," << r.excluded << "\n";
  }
  atomic_write(fs::path(out_dir) / "report.csv", csv.str());
  summary.rows = static_cast<int>(rows.size());

  std::ostringstream digest;
  digest << "covbench digest\n===============\n\n";
  digest << "curves: " << rows.size() << "\n\n";
  digest << "Monotone degradation check (ensemble signed area between curve and diagonal, by sigma):\n";
  for (const auto& [cell_name, by_sigma] : cell_area) {
    digest << "  " << cell_name << ":";
    double prev = std::numeric_limits<double>::infinity();
    int inversions = 0;
    for (const auto& [sigma, area] : by_sigma) {
      digest << " s" << sigma << "=" << fmt(area);
      if (area > prev + 1e-9) ++inversions;
      prev = area;
    }
    digest << (inversions == 0 ? "  [degrades monotonically]"
                               : ("  [" + std::to_string(inversions) + " inversion(s)]"))
           << "\n";
  }
  digest << "\nFlagged cells (posterior MCMC diagnostics tripped):\n";
  if (flagged_cells.empty())
    digest << "  none\n";
  else
    for (const auto& c : flagged_cells) digest << "  " << c << "\n";
  atomic_write(fs::path(out_dir) / "digest.txt", digest.str());
  return summary;
}

}  // namespace covbench::bench
