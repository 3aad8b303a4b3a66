#include "twophase/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "twophase/errors.hpp"

namespace twophase {

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  if (std::isnan(v)) return "-";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

double parse_value(const std::string& s, long line) {
  if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError("report: bad numeric field '" + s + "'", line);
  }
  return v;
}

}  // namespace

void write_report_csv(const MonteCarloReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_report_csv: cannot open " + path);
  out << "scenario,beta0,delta0,estimator,metric,value,replicates,failures\n";
  for (const auto& r : report.rows) {
    out << r.scenario << ',' << fmt_double(r.beta0) << ',' << fmt_double(r.delta0) << ','
        << r.estimator << ',' << r.metric << ',' << fmt_double(r.value) << ',' << r.replicates
        << ',' << r.failures << '\n';
  }
  if (!out) throw IoError("write_report_csv: write failed for " + path);
}

MonteCarloReport read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_report_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("report: empty file", 1);
  MonteCarloReport rep;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 8) throw ParseError("report: expected 8 fields", lineno);
    ReportRow r;
    r.scenario = f[0];
    r.beta0 = parse_value(f[1], lineno);
    r.delta0 = parse_value(f[2], lineno);
    r.estimator = f[3];
    r.metric = f[4];
    r.value = parse_value(f[5], lineno);
    r.replicates = static_cast<long>(parse_value(f[6], lineno));
    r.failures = static_cast<long>(parse_value(f[7], lineno));
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

namespace {

struct PointBlock {
  double beta0, delta0;
  std::vector<std::string> estimators;              // insertion order
  std::map<std::string, std::map<std::string, double>> values;  // estimator -> metric -> value
  std::map<std::string, long> failures;
};

std::string metric_label(const std::string& m) {
  if (m == "sqrt_mse") return "sqrt MSE";
  if (m == "bias") return "Bias";
  if (m == "sqrt_var") return "sqrt Var";
  return m;
}

}  // namespace

std::string render_report_markdown(const MonteCarloReport& report) {
  std::ostringstream out;
  if (report.rows.empty()) return "(empty report)\n";

  if (report.rows.front().scenario == "nwts") {
    out << "# NWTS two-phase resampling study\n\n";
    const auto& coef = nwts_coefficient_names();
    std::vector<std::string> ests;
    for (const auto& r : report.rows) {
      if (std::find(ests.begin(), ests.end(), r.estimator) == ests.end()) {
        ests.push_back(r.estimator);
      }
    }
    for (const auto& est : ests) {
      if (est == "design") continue;
      out << "## " << est << "\n\n| criterion |";
      for (const auto& c : coef) out << ' ' << c << " |";
      if (est != "full_cohort") out << " Sum of squares |";
      out << "\n|---|";
      for (std::size_t i = 0; i < coef.size() + (est != "full_cohort" ? 1 : 0); ++i) out << "---|";
      out << '\n';
      const std::vector<std::string> metrics =
          est == "full_cohort" ? std::vector<std::string>{"estimate", "se"}
                               : std::vector<std::string>{"sqrt_mse", "bias", "sqrt_var"};
      for (const auto& m : metrics) {
        out << "| " << metric_label(m) << " |";
        for (const auto& c : coef) {
          const ReportRow* r = report.find(0.0, 0.0, est, m + ":" + c);
          out << ' ' << (r ? fmt_short(r->value) : "-") << " |";
        }
        if (est != "full_cohort") {
          if (m == "sqrt_mse") {
            const ReportRow* r = report.find(0.0, 0.0, est, "sum_of_squares");
            out << ' ' << (r ? fmt_short(r->value) : "-") << " |";
          } else {
            out << " - |";
          }
        }
        out << '\n';
      }
      out << '\n';
    }
    const ReportRow* s2 = report.find(0.0, 0.0, "design", "mean_s2_size");
    if (s2) out << "mean phase-2 size over draws: " << fmt_short(s2->value) << "\n";
    return out.str();
  }

  out << "# " << report.rows.front().scenario << " Monte Carlo study\n";
  std::vector<PointBlock> blocks;
  for (const auto& r : report.rows) {
    auto it = std::find_if(blocks.begin(), blocks.end(), [&](const PointBlock& b) {
      return b.beta0 == r.beta0 && b.delta0 == r.delta0;
    });
    if (it == blocks.end()) {
      blocks.push_back({r.beta0, r.delta0, {}, {}, {}});
      it = blocks.end() - 1;
    }
    if (r.estimator != "diagnostic" &&
        std::find(it->estimators.begin(), it->estimators.end(), r.estimator) ==
            it->estimators.end()) {
      it->estimators.push_back(r.estimator);
    }
    it->values[r.estimator][r.metric] = r.value;
    it->failures[r.estimator] = std::max(it->failures[r.estimator], r.failures);
  }

  for (const auto& b : blocks) {
    out << "\n## (beta0, delta0) = (" << fmt_short(b.beta0) << ", " << fmt_short(b.delta0)
        << ")\n\n| criterion |";
    for (const auto& e : b.estimators) out << ' ' << e << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < b.estimators.size(); ++i) out << "---|";
    out << '\n';
    for (const std::string m : {"sqrt_mse", "bias", "sqrt_var"}) {
      out << "| " << metric_label(m) << " |";
      for (const auto& e : b.estimators) {
        std::string cell = "-";
        const auto it = b.values.find(e);
        if (it != b.values.end()) {
          const auto mit = it->second.find(m);
          if (mit != it->second.end()) cell = fmt_short(mit->second);
        }
        out << ' ' << cell << " |";
      }
      out << '\n';
    }
    const auto diag = b.values.find("diagnostic");
    if (diag != b.values.end()) {
      out << '\n';
      auto show = [&](const char* key, const char* label) {
        const auto it = diag->second.find(key);
        if (it != diag->second.end()) {
          out << label << ": " << fmt_short(it->second) << "  \n";
        }
      };
      show("mp_power", "MP test power");
      show("gof_power", "Lin. test power");
      show("abs_corr", "Abs Corr");
    }
    long total_failures = 0;
    for (const auto& [est, f] : b.failures) total_failures += f;
    if (total_failures > 0) {
      out << "\nfailed replicates:";
      for (const auto& e : b.estimators) {
        if (b.failures.at(e) > 0) out << ' ' << e << "=" << b.failures.at(e);
      }
      out << '\n';
    }
  }
  return out.str();
}

void write_report_markdown(const MonteCarloReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_report_markdown: cannot open " + path);
  out << render_report_markdown(report);
  if (!out) throw IoError("write_report_markdown: write failed for " + path);
}

void write_relative_efficiency_csv(const MonteCarloReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_relative_efficiency_csv: cannot open " + path);
  out << "scenario,beta0,delta0,estimator,reference,mse_ratio\n";
  if (report.rows.empty()) return;
  const std::string scenario = report.rows.front().scenario;
  if (scenario == "nwts") return;
  const std::string ref = scenario == "case-control" ? "ipw" : "raking";

  std::vector<std::pair<double, double>> points;
  std::vector<std::string> ests;
  for (const auto& r : report.rows) {
    if (r.metric != "sqrt_mse" || r.estimator == "diagnostic") continue;
    if (std::find(points.begin(), points.end(), std::make_pair(r.beta0, r.delta0)) ==
        points.end()) {
      points.emplace_back(r.beta0, r.delta0);
    }
    if (std::find(ests.begin(), ests.end(), r.estimator) == ests.end()) {
      ests.push_back(r.estimator);
    }
  }
  for (const auto& [b0, d0] : points) {
    const ReportRow* rr = report.find(b0, d0, ref, "sqrt_mse");
    if (!rr || std::isnan(rr->value) || rr->value <= 0.0) continue;
    const double ref_mse = rr->value * rr->value;
    for (const auto& e : ests) {
      const ReportRow* r = report.find(b0, d0, e, "sqrt_mse");
      if (!r || std::isnan(r->value)) continue;
      out << scenario << ',' << fmt_double(b0) << ',' << fmt_double(d0) << ',' << e << ',' << ref
          << ',' << fmt_double(r->value * r->value / ref_mse) << '\n';
    }
  }
  if (!out) throw IoError("write_relative_efficiency_csv: write failed for " + path);
}

}  // namespace twophase
