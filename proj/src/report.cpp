#include <algorithm>
#include <cstdio>
#include <sstream>

#include "warpfault/campaign.hpp"
#include "warpfault/errors.hpp"

namespace warpfault {

ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "markdown" || s == "md") return ReportFormat::Markdown;
  throw ValidationError("unknown report format '" + std::string(s) + "'");
}

const std::vector<std::string>& report_classes() {
  static const std::vector<std::string> classes{
      "Masked",      "SDC",        "DUE",        "DUE.Hang",      "DUE.Crash",         "DUE.EccDoubleBit",
      "SDC.Single",  "SDC.Line",   "SDC.Square", "SDC.Random",    "SDC.Critical",      "SDC.Tolerable",
      "SDC.FalsePositive", "SDC.Misdetection", "SDC.ClassChange", "SDC.BoxDrift"};
  return classes;
}

namespace {

std::uint64_t class_count(const CampaignStats& s, const std::string& cls) {
  if (cls == "Masked") return s.masked;
  if (cls == "SDC") return s.sdc;
  if (cls == "DUE") return s.due;
  if (cls == "SDC.Critical") return s.critical_svf().count;
  for (DueReason r : kAllDueReasons) {
    if (cls == "DUE." + std::string(to_string(r))) return s.due_by_reason[static_cast<std::size_t>(r)];
  }
  for (GeometryClass g : kAllGeometries) {
    if (cls == "SDC." + std::string(to_string(g))) return s.sdc_by_geometry[static_cast<std::size_t>(g)];
  }
  for (Criticality c : kAllCriticalities) {
    if (cls == "SDC." + std::string(to_string(c))) return s.sdc_by_criticality[static_cast<std::size_t>(c)];
  }
  throw ContractViolation("unknown report class " + cls);
}

std::string percent(const Fraction& f) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%% [%.2f, %.2f]", 100.0 * f.value, 100.0 * f.ci.lo, 100.0 * f.ci.hi);
  return buf;
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string json_report(const NamedStats& stats, const std::optional<FitParams>& fit) {
  nlohmann::json configs = nlohmann::json::array();
  for (const auto& [name, s] : stats) {
    nlohmann::json classes = nlohmann::json::object();
    for (const std::string& cls : report_classes()) {
      const Fraction f = s.fraction(class_count(s, cls));
      classes[cls] = {{"count", f.count}, {"fraction", f.value}, {"ci_lo", f.ci.lo}, {"ci_hi", f.ci.hi}};
    }
    nlohmann::json entry{{"config", name}, {"injections", s.n}, {"classes", classes}};
    if (fit) {
      entry["fit"] = {{"sdc", warpfault::fit(s.sdc, *fit)},
                      {"critical_sdc", warpfault::fit(s.critical_svf().count, *fit)},
                      {"due", warpfault::fit(s.due, *fit)}};
    }
    configs.push_back(entry);
  }
  nlohmann::json doc{{"tool", kToolName}, {"tool_version", kToolVersion}, {"configs", configs}};
  if (fit) doc["fit_params"] = {{"fluence", fit->fluence}, {"flux", fit->reference_flux}};
  return doc.dump(2) + "\n";
}

std::string csv_report(const NamedStats& stats) {
  std::ostringstream out;
  out << "config,class,count,fraction,ci_lo,ci_hi\n";
  for (const auto& [name, s] : stats) {
    for (const std::string& cls : report_classes()) {
      const Fraction f = s.fraction(class_count(s, cls));
      out << name << ',' << cls << ',' << f.count << ',' << number(f.value) << ',' << number(f.ci.lo) << ','
          << number(f.ci.hi) << '\n';
    }
  }
  return out.str();
}

std::string markdown_report(const NamedStats& stats, const std::optional<FitParams>& fit) {
  std::ostringstream out;
  out << "# Campaign summary\n\n";
  out << "Fractions are of all injections of the configuration, with 95% Wilson intervals.\n\n";
  // GEMM targets carry no detection output, so criticality is left out.
  const bool criticality = std::any_of(stats.begin(), stats.end(),
                                       [](const auto& entry) { return entry.second.sdc_with_criticality > 0; });
  out << "| config | n | Masked | SDC | DUE |" << (criticality ? " Critical SDC |" : "") << "\n|---|---:|---|---|---|"
      << (criticality ? "---|" : "") << "\n";
  for (const auto& [name, s] : stats) {
    out << "| " << name << " | " << s.n << " | " << percent(s.masked_fraction()) << " | " << percent(s.svf())
        << " | " << percent(s.due_fraction()) << " |";
    if (criticality) out << ' ' << percent(s.critical_svf()) << " |";
    out << '\n';
  }
  out << "\n## SDC geometry\n\n| config |";
  for (GeometryClass g : kAllGeometries) out << ' ' << to_string(g) << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < kAllGeometries.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& [name, s] : stats) {
    out << "| " << name << " |";
    for (GeometryClass g : kAllGeometries) out << ' ' << percent(s.geometry_svf(g)) << " |";
    out << '\n';
  }
  if (criticality) {
    out << "\n## SDC criticality\n\n| config |";
    for (Criticality c : kAllCriticalities) out << ' ' << to_string(c) << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < kAllCriticalities.size(); ++i) out << "---|";
    out << '\n';
    for (const auto& [name, s] : stats) {
      out << "| " << name << " |";
      for (Criticality c : kAllCriticalities) out << ' ' << percent(s.criticality_svf(c)) << " |";
      out << '\n';
    }
  }
  if (fit) {
    out << "\n## FIT projection\n\nfluence " << number(fit->fluence) << " particles/cm^2, reference flux "
        << number(fit->reference_flux) << " particles/(cm^2 h)\n\n";
    out << "| config | SDC FIT |" << (criticality ? " Critical SDC FIT |" : "") << " DUE FIT |\n|---|---:|"
        << (criticality ? "---:|" : "") << "---:|\n";
    for (const auto& [name, s] : stats) {
      out << "| " << name << " | " << number(warpfault::fit(s.sdc, *fit)) << " | ";
      if (criticality) out << number(warpfault::fit(s.critical_svf().count, *fit)) << " | ";
      out << number(warpfault::fit(s.due, *fit)) << " |\n";
    }
  }
  return out.str();
}

}  // namespace

std::string report(const NamedStats& stats, ReportFormat format, const std::optional<FitParams>& fit) {
  if (stats.empty()) throw ValidationError("report needs at least one configuration");
  for (const auto& [name, s] : stats) {
    if (s.n == 0) throw ValidationError("configuration " + name + " has no injections");
  }
  switch (format) {
    case ReportFormat::Json: return json_report(stats, fit);
    case ReportFormat::Csv: return csv_report(stats);
    case ReportFormat::Markdown: return markdown_report(stats, fit);
  }
  return {};
}

}  // namespace warpfault
