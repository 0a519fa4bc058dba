#include "bench/plots.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace covbench::bench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPanel = 150.0;
constexpr double kGap = 14.0;
constexpr double kLeft = 86.0;
constexpr double kTop = 40.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct CurveData {
  std::string est_id;
  bool is_ensemble = false;
  std::vector<double> nominal, empirical, band_lo, band_hi;
};

struct PanelKey {
  std::string row;  // "algorithm/variant"
  int sigma = 0;
  bool operator<(const PanelKey& o) const { return std::tie(row, sigma) < std::tie(o.row, o.sigma); }
};

void polyline(std::ostream& os, const std::vector<double>& xs, const std::vector<double>& ys, double x0,
              double y0, const char* style) {
  os << "<polyline fill=\"none\" " << style << " points=\"";
  for (size_t i = 0; i < xs.size(); ++i) {
    os << fmt(x0 + xs[i] * kPanel) << "," << fmt(y0 + (1.0 - ys[i]) * kPanel);
    if (i + 1 < xs.size()) os << " ";
  }
  os << "\"/>\n";
}

}  // namespace

PlotSummary emit_plots(const std::string& out_dir) {
  const fs::path dir = fs::path(out_dir) / "curves";
  std::vector<fs::path> files;
  if (fs::exists(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("emit_plots: no curve artifacts in " + dir.string());

  // group curves: (task, n_train) -> panel -> curves
  std::map<std::pair<std::string, int64_t>, std::map<PanelKey, std::vector<CurveData>>> groups;
  std::map<std::pair<std::string, int64_t>, std::set<int>> sigmas_of;
  std::map<std::pair<std::string, int64_t>, std::set<std::string>> rows_of;
  for (const auto& file : files) {
    std::ifstream is(file);
    json artifact = json::parse(is);
    const auto& cell = artifact.at("cell");
    const auto group_key = std::make_pair(cell.at("task").get<std::string>(), cell.at("n_train").get<int64_t>());
    const std::string row =
        cell.at("algorithm").get<std::string>() + "/" + cell.at("variant").get<std::string>();
    for (const auto& curve : artifact.at("curves")) {
      CurveData cd;
      cd.est_id = curve.at("seed_or_ensemble_id").get<std::string>();
      cd.is_ensemble = curve.at("variant").get<std::string>() == "ensemble";
      cd.nominal = curve.at("nominal").get<std::vector<double>>();
      cd.empirical = curve.at("empirical").get<std::vector<double>>();
      cd.band_lo = curve.at("band_lo").get<std::vector<double>>();
      cd.band_hi = curve.at("band_hi").get<std::vector<double>>();
      // ascending nominal for drawing
      std::reverse(cd.nominal.begin(), cd.nominal.end());
      std::reverse(cd.empirical.begin(), cd.empirical.end());
      std::reverse(cd.band_lo.begin(), cd.band_lo.end());
      std::reverse(cd.band_hi.begin(), cd.band_hi.end());
      const int sigma = curve.at("sigma").get<int>();
      groups[group_key][{row, sigma}].push_back(std::move(cd));
      sigmas_of[group_key].insert(sigma);
      rows_of[group_key].insert(row);
    }
  }

  PlotSummary summary;
  for (const auto& [group_key, panels] : groups) {
    const auto& [task, n_train] = group_key;
    const std::vector<int> sigmas(sigmas_of[group_key].begin(), sigmas_of[group_key].end());
    const std::vector<std::string> rows(rows_of[group_key].begin(), rows_of[group_key].end());
    const double width = kLeft + sigmas.size() * (kPanel + kGap) + kGap;
    const double height = kTop + rows.size() * (kPanel + kGap) + kGap;

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\""
       << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << " " << fmt(height) << "\">\n";
    os << "<style>text{font-family:sans-serif;font-size:11px;}</style>\n";
    os << "<text x=\"" << fmt(kLeft) << "\" y=\"16\">" << task << ", n_train=" << n_train
       << " (x: nominal coverage 1-alpha, y: empirical coverage)</text>\n";

    for (size_t r = 0; r < rows.size(); ++r) {
      const double y0 = kTop + r * (kPanel + kGap);
      os << "<text x=\"6\" y=\"" << fmt(y0 + kPanel / 2) << "\">" << rows[r] << "</text>\n";
      for (size_t c = 0; c < sigmas.size(); ++c) {
        const double x0 = kLeft + c * (kPanel + kGap);
        if (r == 0)
          os << "<text x=\"" << fmt(x0 + kPanel / 2 - 18) << "\" y=\"" << fmt(kTop - 8) << "\">sigma="
             << sigmas[c] << "</text>\n";
        os << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\"" << fmt(kPanel)
           << "\" height=\"" << fmt(kPanel) << "\" fill=\"white\" stroke=\"#888\" stroke-width=\"0.7\"/>\n";

        const auto it = panels.find({rows[r], sigmas[c]});
        if (it == panels.end()) {
          summary.missing_panels += 1;
          os << "<text x=\"" << fmt(x0 + kPanel / 2 - 24) << "\" y=\"" << fmt(y0 + kPanel / 2)
             << "\" fill=\"#b00\">missing</text>\n";
          continue;
        }
        // diagonal
        os << "<line x1=\"" << fmt(x0) << "\" y1=\"" << fmt(y0 + kPanel) << "\" x2=\"" << fmt(x0 + kPanel)
           << "\" y2=\"" << fmt(y0) << "\" stroke=\"#444\" stroke-width=\"0.8\" stroke-dasharray=\"4,3\"/>\n";
        // band of the ensemble curve, then thin seeds, then the thick ensemble
        for (const auto& cd : it->second) {
          if (!cd.is_ensemble) continue;
          os << "<polygon fill=\"#9467bd\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
          for (size_t i = 0; i < cd.nominal.size(); ++i)
            os << fmt(x0 + cd.nominal[i] * kPanel) << "," << fmt(y0 + (1.0 - cd.band_hi[i]) * kPanel) << " ";
          for (size_t i = cd.nominal.size(); i-- > 0;)
            os << fmt(x0 + cd.nominal[i] * kPanel) << "," << fmt(y0 + (1.0 - cd.band_lo[i]) * kPanel)
               << (i == 0 ? "" : " ");
          os << "\"/>\n";
        }
        for (const auto& cd : it->second)
          if (!cd.is_ensemble)
            polyline(os, cd.nominal, cd.empirical, x0, y0,
                     "stroke=\"#1f77b4\" stroke-width=\"0.8\" stroke-opacity=\"0.55\"");
        for (const auto& cd : it->second)
          if (cd.is_ensemble)
            polyline(os, cd.nominal, cd.empirical, x0, y0, "stroke=\"#9467bd\" stroke-width=\"2.2\"");
      }
    }
    os << "</svg>\n";

    const fs::path path = fs::path(out_dir) / "plots" / (task + "_n" + std::to_string(n_train) + ".svg");
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary);
      f << os.str();
    }
    fs::rename(tmp, path);
    summary.files_written += 1;
  }
  return summary;
}

}  // namespace covbench::bench
