#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "slicer/harness.h"

namespace slicer {

// One Table-style row: an agent evaluated on one traffic scenario.
struct ReportRow {
  std::string agent;
  std::string scenario;
  MetricsRecord metrics;
};

struct NamedCurve {
  std::string name;
  std::vector<EpochStats> epochs;
  // Draw the min/max band (domain-randomized training).
  bool band = false;
};

struct NamedSweep {
  std::string name;
  SweepResult sweep;
};

struct Report {
  std::vector<ReportRow> rows;
  std::vector<NamedCurve> curves;
  std::vector<NamedSweep> sweeps;
  double beta_thresh_pct = 10.0;
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
  static Report from_json(const nlohmann::json& j);
  // Appends another report's rows, curves and sweeps.
  void merge(const Report& other);
};

std::string metrics_csv(const std::vector<ReportRow>& rows);
std::string curve_csv(const NamedCurve& curve);
std::string sweep_csv(const NamedSweep& sweep);

// Writes metrics.csv, summary.json, curves/<name>.csv and curves/*.png under dir.
void emit_report(const Report& report, const std::filesystem::path& dir);

Report load_report(const std::filesystem::path& summary_json);

}  // namespace slicer
