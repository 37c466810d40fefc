#include "slicer/report.h"

#include <cctype>
#include <fstream>
#include <sstream>

#include "csv.h"
#include "slicer/error.h"
#include "slicer/plot.h"

namespace slicer {

namespace {

const std::string kMetricsHeader =
    "agent,scenario,label,mean_bandwidth_pct,min_bandwidth_pct,max_bandwidth_pct,"
    "mean_qos_degradation_pct,min_qos_degradation_pct,max_qos_degradation_pct,episodes,config_hash";

const Rgb kBlue{31, 119, 180};
const Rgb kOrange{255, 127, 14};
const Rgb kRed{214, 39, 40};
const Rgb kGray{120, 120, 120};

std::string metrics_fields(const MetricsRecord& m) {
  using csv::format_double;
  return m.label + "," + format_double(m.mean_bandwidth_pct) + "," + format_double(m.min_bandwidth_pct) + "," +
         format_double(m.max_bandwidth_pct) + "," + format_double(m.mean_qos_degradation_pct) + "," +
         format_double(m.min_qos_degradation_pct) + "," + format_double(m.max_qos_degradation_pct) + "," +
         std::to_string(m.episodes) + "," + m.config_hash;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string safe_name(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return s;
}

}  // namespace

nlohmann::json Report::to_json() const {
  nlohmann::json rows_j = nlohmann::json::array();
  for (const auto& r : rows) rows_j.push_back({{"agent", r.agent}, {"scenario", r.scenario}, {"metrics", r.metrics.to_json()}});
  nlohmann::json curves_j = nlohmann::json::array();
  for (const auto& c : curves) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : c.epochs) epochs.push_back(e.to_json());
    curves_j.push_back({{"name", c.name}, {"band", c.band}, {"epochs", epochs}});
  }
  nlohmann::json sweeps_j = nlohmann::json::array();
  for (const auto& s : sweeps) sweeps_j.push_back({{"name", s.name}, {"sweep", s.sweep.to_json()}});
  return {{"rows", rows_j},
          {"curves", curves_j},
          {"sweeps", sweeps_j},
          {"beta_thresh_pct", beta_thresh_pct},
          {"extra", extra}};
}

Report Report::from_json(const nlohmann::json& j) {
  Report r;
  try {
    for (const auto& row : j.at("rows")) {
      r.rows.push_back({row.at("agent"), row.at("scenario"), MetricsRecord::from_json(row.at("metrics"))});
    }
    for (const auto& c : j.at("curves")) {
      NamedCurve curve;
      curve.name = c.at("name");
      curve.band = c.at("band");
      for (const auto& e : c.at("epochs")) curve.epochs.push_back(EpochStats::from_json(e));
      r.curves.push_back(std::move(curve));
    }
    for (const auto& s : j.at("sweeps")) r.sweeps.push_back({s.at("name"), SweepResult::from_json(s.at("sweep"))});
    r.beta_thresh_pct = j.at("beta_thresh_pct");
    r.extra = j.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed summary: ") + e.what());
  }
  return r;
}

void Report::merge(const Report& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  curves.insert(curves.end(), other.curves.begin(), other.curves.end());
  sweeps.insert(sweeps.end(), other.sweeps.begin(), other.sweeps.end());
  for (auto it = other.extra.begin(); it != other.extra.end(); ++it) extra[it.key()] = it.value();
}

std::string metrics_csv(const std::vector<ReportRow>& rows) {
  std::string out = kMetricsHeader + "\n";
  for (const auto& r : rows) out += r.agent + "," + r.scenario + "," + metrics_fields(r.metrics) + "\n";
  return out;
}

std::string curve_csv(const NamedCurve& curve) {
  using csv::format_double;
  std::string out =
      "epoch,mean_bandwidth_pct,min_bandwidth_pct,max_bandwidth_pct,mean_beta_pct,min_beta_pct,max_beta_pct,"
      "selection_bandwidth_pct,selection_beta_pct\n";
  for (const auto& e : curve.epochs) {
    out += std::to_string(e.epoch) + "," + format_double(e.mean_bandwidth_pct) + "," +
           format_double(e.min_bandwidth_pct) + "," + format_double(e.max_bandwidth_pct) + "," +
           format_double(e.mean_beta_pct) + "," + format_double(e.min_beta_pct) + "," +
           format_double(e.max_beta_pct) + "," + format_double(e.selection_bandwidth_pct) + "," +
           format_double(e.selection_beta_pct) + "\n";
  }
  return out;
}

std::string sweep_csv(const NamedSweep& sweep) {
  std::string out = "parameter,value," + kMetricsHeader.substr(std::string("agent,scenario,").size()) + "\n";
  const auto& s = sweep.sweep;
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    out += s.parameter + "," + csv::format_double(s.values[i]) + "," + metrics_fields(s.records[i]) + "\n";
  }
  if (!s.records.empty()) out += s.parameter + ",reference," + metrics_fields(s.reference) + "\n";
  return out;
}

void emit_report(const Report& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "curves", ec);
  if (ec) throw IoError("cannot create " + (dir / "curves").string() + ": " + ec.message());
  write_text(dir / "metrics.csv", metrics_csv(report.rows));
  write_text(dir / "summary.json", report.to_json().dump(2) + "\n");

  for (const auto& c : report.curves) {
    const std::string base = safe_name(c.name);
    write_text(dir / "curves" / (base + ".csv"), curve_csv(c));
    if (c.epochs.empty()) continue;
    std::vector<double> x, bw, bw_lo, bw_hi, beta, beta_lo, beta_hi;
    for (const auto& e : c.epochs) {
      x.push_back(static_cast<double>(e.epoch));
      bw.push_back(e.mean_bandwidth_pct);
      bw_lo.push_back(e.min_bandwidth_pct);
      bw_hi.push_back(e.max_bandwidth_pct);
      beta.push_back(e.mean_beta_pct);
      beta_lo.push_back(e.min_beta_pct);
      beta_hi.push_back(e.max_beta_pct);
    }
    LinePlot bw_plot;
    LinePlot beta_plot;
    if (c.band) {
      bw_plot.bands.push_back({x, bw_lo, bw_hi, {198, 219, 239}});
      beta_plot.bands.push_back({x, beta_lo, beta_hi, {253, 208, 162}});
    }
    bw_plot.series.push_back({x, bw, kBlue, false});
    beta_plot.series.push_back({x, beta, kOrange, false});
    beta_plot.series.push_back({{x.front(), x.back()}, {report.beta_thresh_pct, report.beta_thresh_pct}, kRed, true});
    write_line_plot(bw_plot, dir / "curves" / (base + "_bandwidth.png"));
    write_line_plot(beta_plot, dir / "curves" / (base + "_beta.png"));
  }

  for (const auto& s : report.sweeps) {
    const std::string base = "sweep_" + safe_name(s.name);
    write_text(dir / "curves" / (base + ".csv"), sweep_csv(s));
    const auto& sw = s.sweep;
    if (sw.records.empty()) continue;
    std::vector<double> bw, beta;
    for (const auto& r : sw.records) {
      bw.push_back(r.mean_bandwidth_pct);
      beta.push_back(r.mean_qos_degradation_pct);
    }
    const double x0 = sw.values.front(), x1 = sw.values.back();
    LinePlot plot;
    plot.series.push_back({sw.values, bw, kBlue, false});
    plot.series.push_back({sw.values, beta, kOrange, false});
    plot.series.push_back({{x0, x1}, {sw.reference.mean_bandwidth_pct, sw.reference.mean_bandwidth_pct}, kBlue, true});
    plot.series.push_back(
        {{x0, x1}, {sw.reference.mean_qos_degradation_pct, sw.reference.mean_qos_degradation_pct}, kOrange, true});
    plot.series.push_back({{x0, x1}, {report.beta_thresh_pct, report.beta_thresh_pct}, kGray, true});
    write_line_plot(plot, dir / "curves" / (base + ".png"));
  }
}

Report load_report(const std::filesystem::path& summary_json) {
  std::ifstream in(summary_json);
  if (!in) throw IoError("cannot read " + summary_json.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Report::from_json(nlohmann::json::parse(ss.str()));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(summary_json.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace slicer
