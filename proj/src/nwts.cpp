#include "twophase/nwts.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "twophase/errors.hpp"

namespace twophase {

Eigen::VectorXd NwtsCohort::stage_dichotomous() const {
  Eigen::VectorXd s(stage_raw.size());
  for (long i = 0; i < stage_raw.size(); ++i) s[i] = stage_raw[i] >= 3 ? 1.0 : 0.0;
  return s;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim spaces and quotes
    const auto b = field.find_first_not_of(" \t\r\"");
    const auto e = field.find_last_not_of(" \t\r\"");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, long line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError("load_nwts: bad numeric field '" + s + "'", line);
  }
  return v;
}

int parse_binary(const std::string& s, const char* what, long line) {
  const double v = parse_double(s, line);
  if (v != 0.0 && v != 1.0) {
    throw ParseError(std::string("load_nwts: ") + what + " must be 0/1, got '" + s + "'", line);
  }
  return static_cast<int>(v);
}

}  // namespace

NwtsCohort load_nwts(const std::string& path, const NwtsColumnMap& map) {
  std::ifstream in(path);
  if (!in) throw IoError("load_nwts: cannot open " + path);

  std::string header;
  if (!std::getline(in, header)) throw SchemaError("load_nwts: empty file " + path);
  const auto names = split_csv_line(header);

  auto column_of = [&](const std::string& wanted) -> long {
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (names[j] == wanted) return static_cast<long>(j);
    }
    throw SchemaError("load_nwts: missing column '" + wanted + "' in " + path);
  };
  const long c_rel = column_of(map.relapse);
  const long c_ins = column_of(map.instit);
  const long c_his = column_of(map.histol);
  const long c_stg = column_of(map.stage);
  const long c_age = column_of(map.age);
  const long c_dia = column_of(map.diameter);

  std::vector<std::array<double, 6>> rows;
  std::string line;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<long>(fields.size()) <= std::max({c_rel, c_ins, c_his, c_stg, c_age, c_dia})) {
      throw ParseError("load_nwts: too few fields", lineno);
    }
    std::array<double, 6> row;
    row[0] = parse_binary(fields[c_rel], "relapse", lineno);
    row[1] = parse_binary(fields[c_ins], "instit", lineno);
    row[2] = parse_binary(fields[c_his], "histol", lineno);
    row[3] = parse_double(fields[c_stg], lineno);
    if (row[3] < 1 || row[3] > 4 || row[3] != std::floor(row[3])) {
      throw ParseError("load_nwts: stage must be 1..4, got '" + fields[c_stg] + "'", lineno);
    }
    row[4] = parse_double(fields[c_age], lineno);
    row[5] = parse_double(fields[c_dia], lineno);
    rows.push_back(row);
  }
  if (rows.empty()) throw SchemaError("load_nwts: no data rows in " + path);

  NwtsCohort c;
  const long n = static_cast<long>(rows.size());
  c.relapse.resize(n);
  c.instit.resize(n);
  c.histol.resize(n);
  c.stage_raw.resize(n);
  c.age.resize(n);
  c.diameter.resize(n);
  for (long i = 0; i < n; ++i) {
    c.relapse[i] = static_cast<int>(rows[i][0]);
    c.instit[i] = static_cast<int>(rows[i][1]);
    c.histol[i] = static_cast<int>(rows[i][2]);
    c.stage_raw[i] = static_cast<int>(rows[i][3]);
    c.age[i] = rows[i][4];
    c.diameter[i] = rows[i][5];
  }
  return c;
}

std::string serialize_nwts(const NwtsCohort& cohort, const NwtsColumnMap& map) {
  std::string out = map.relapse + "," + map.instit + "," + map.histol + "," + map.stage + "," +
                    map.age + "," + map.diameter + "\n";
  char buf[128];
  for (long i = 0; i < cohort.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%.17g,%.17g\n", cohort.relapse[i],
                  cohort.instit[i], cohort.histol[i], cohort.stage_raw[i], cohort.age[i],
                  cohort.diameter[i]);
    out += buf;
  }
  return out;
}

TwoPhaseSample sample_nwts_design(const NwtsCohort& cohort, RngStream& rng) {
  const long N = cohort.size();
  TwoPhaseSample s;
  s.R.assign(N, 0);
  s.pi.setOnes(N);

  std::array<std::vector<long>, 4> pool;  // non-relapsed favorable-local, by raw stage
  std::array<long, 4> case_count{0, 0, 0, 0};
  for (long i = 0; i < N; ++i) {
    if (cohort.relapse[i] == 1 || cohort.instit[i] == 1) {
      s.R[i] = 1;
    } else {
      pool[cohort.stage_raw[i] - 1].push_back(i);
    }
    if (cohort.relapse[i] == 1) ++case_count[cohort.stage_raw[i] - 1];
  }

  for (int st = 0; st < 4; ++st) {
    auto& ids = pool[st];
    const long want = case_count[st];
    if (ids.empty()) continue;
    long draw = want;
    if (want >= static_cast<long>(ids.size())) {
      draw = static_cast<long>(ids.size());
      if (want > draw) ++s.capped_strata;
    }
    const double pi_st = double(draw) / double(ids.size());
    for (long i : ids) s.pi[i] = pi_st;
    for (long d = 0; d < draw; ++d) {
      const std::size_t j = d + rng.uniform_index(ids.size() - d);
      std::swap(ids[d], ids[j]);
      s.R[ids[d]] = 1;
    }
  }
  s.s2_size = 0;
  for (auto r : s.R) s.s2_size += r;
  return s;
}

DesignMatrix nwts_outcome_design(const NwtsCohort& cohort, const Eigen::VectorXd& histology) {
  if (histology.size() != cohort.size()) {
    throw DimensionMismatch("nwts_outcome_design: histology length mismatch");
  }
  const Eigen::VectorXd stage2 = cohort.stage_dichotomous();
  DesignMatrix d;
  d.X.resize(cohort.size(), 6);
  d.X.col(0).setOnes();
  d.X.col(1) = cohort.age;
  d.X.col(2) = cohort.diameter;
  d.X.col(3) = histology;
  d.X.col(4) = stage2;
  d.X.col(5) = histology.array() * stage2.array();
  d.column_names = {"(const)", "age", "diameter", "histology", "stage", "histology:stage"};
  return d;
}

DesignMatrix nwts_imputation_design(const NwtsCohort& cohort) {
  const long n = cohort.size();
  const Eigen::VectorXd stage2 = cohort.stage_dichotomous();
  Eigen::VectorXd rel = cohort.relapse.cast<double>();
  Eigen::VectorXd loc = cohort.instit.cast<double>();
  DesignMatrix d;
  d.X.resize(n, 10);
  d.X.col(0).setOnes();
  d.X.col(1) = cohort.age;
  d.X.col(2) = cohort.diameter;
  d.X.col(3) = rel;
  d.X.col(4) = stage2;
  d.X.col(5) = loc;
  d.X.col(6) = rel.array() * stage2.array();
  d.X.col(7) = rel.array() * loc.array();
  d.X.col(8) = stage2.array() * loc.array();
  d.X.col(9) = rel.array() * stage2.array() * loc.array();
  d.column_names = {"(const)",       "age",          "diameter",     "relapse",
                    "stage",         "local",        "relapse:stage", "relapse:local",
                    "stage:local",   "relapse:stage:local"};
  return d;
}

NwtsCohort synthetic_nwts_cohort(long n, RngStream& rng) {
  NwtsCohort c;
  c.relapse.resize(n);
  c.instit.resize(n);
  c.histol.resize(n);
  c.stage_raw.resize(n);
  c.age.resize(n);
  c.diameter.resize(n);
  for (long i = 0; i < n; ++i) {
    const double stage_u = rng.uniform01();
    const int stage = stage_u < 0.40 ? 1 : stage_u < 0.68 ? 2 : stage_u < 0.90 ? 3 : 4;
    const double age = std::max(0.05, 3.5 + 2.6 * rng.normal());
    const double diam = std::max(1.0, 11.0 + 4.0 * rng.normal());
    // central histology depends on age and stage; local mislabels ~8% each way
    const double p_uh = expit(-3.3 + 0.25 * age + 0.25 * (stage >= 3 ? 1.0 : 0.0));
    const int histol = rng.bernoulli(p_uh) ? 1 : 0;
    int instit = histol;
    if (rng.uniform01() < (histol ? 0.25 : 0.08)) instit = 1 - instit;
    const double eta = -2.6 + 0.07 * age + 0.025 * diam + 1.2 * histol +
                       0.4 * (stage >= 3 ? 1.0 : 0.0) +
                       0.8 * histol * (stage >= 3 ? 1.0 : 0.0);
    c.relapse[i] = rng.bernoulli(expit(eta)) ? 1 : 0;
    c.instit[i] = instit;
    c.histol[i] = histol;
    c.stage_raw[i] = stage;
    c.age[i] = age;
    c.diameter[i] = diam;
  }
  return c;
}

}  // namespace twophase
