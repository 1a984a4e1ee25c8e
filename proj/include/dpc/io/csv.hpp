#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dpc/distribution.hpp"
#include "dpc/engine.hpp"
#include "dpc/errors.hpp"

namespace dpc::io {

/// Shortest text that parses back to the same double ("nan" for NaN).
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_number(std::string_view s, const std::string& where) {
  s = detail::trim(s);
  if (s == "nan") return std::nan("");
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  if (!detail::parse_double(s, v)) throw InputError(where + ": not a number '" + std::string(s) + "'");
  return v;
}

/// Header plus string cells; fields never contain commas here.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw InputError("csv: missing column '" + std::string(name) + "'");
  }
  bool has_column(std::string_view name) const {
    for (const auto& h : header) {
      if (h == name) return true;
    }
    return false;
  }
};

inline Table read_table(std::istream& in, const std::string& source) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> cells;
    for (auto f : detail::split(line)) cells.emplace_back(detail::trim(f));
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw InputError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                       " fields");
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw InputError(source + ": empty file");
  return t;
}

inline Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_table(in, path);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  CsvWriter& cell(const std::string& s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }
  CsvWriter& num(double v) { return cell(format_number(v)); }
  CsvWriter& integer(long long v) { return cell(std::to_string(v)); }
  CsvWriter& flag(bool b) { return cell(b ? "1" : "0"); }
  void end() {
    out_ << '\n';
    first_ = true;
  }

 private:
  std::ostream& out_;
  bool first_ = true;
};

inline Eigen::Index max_input_dim(const RunResult& res) {
  Eigen::Index m = 0;
  for (const auto& r : res.records) m = std::max(m, r.u.size());
  return m;
}

inline std::string trajectories_csv(const RunResult& res) {
  std::ostringstream out;
  CsvWriter w(out);
  w.cell("agent").cell("k").cell("y1").cell("y2").end();
  for (std::size_t a = 0; a < res.trajectories.size(); ++a) {
    for (std::size_t i = 0; i < res.trajectories[a].size(); ++i) {
      const Point& y = res.trajectories[a][i];
      w.integer(static_cast<long long>(a)).integer(static_cast<long long>(i) + 1).num(y.x()).num(y.y()).end();
    }
  }
  return out.str();
}

inline std::string metrics_csv(const RunResult& res) {
  const Eigen::Index m = max_input_dim(res);
  std::ostringstream out;
  CsvWriter w(out);
  w.cell("agent").cell("k");
  for (Eigen::Index i = 0; i < m; ++i) w.cell("u" + std::to_string(i + 1));
  w.cell("delta_w").cell("local_w").cell("in_range").cell("range_nonempty").cell("comm_events");
  w.cell("stageA_ms").cell("stageB_ms").cell("stageC_ms").cell("bound_violation").end();
  for (const auto& r : res.records) {
    w.integer(r.agent).integer(r.k);
    for (Eigen::Index i = 0; i < m; ++i) i < r.u.size() ? w.num(r.u(i)) : w.cell("");
    w.num(r.delta_w).num(r.local_w).flag(r.in_range).flag(r.range_nonempty);
    w.integer(static_cast<long long>(r.comm_events));
    w.num(r.stage_a_ms).num(r.stage_b_ms).num(r.stage_c_ms).flag(r.bound_violation).end();
  }
  return out.str();
}

/// Per-step controller internals: unconstrained input, gains and realized look-ahead.
inline std::string control_csv(const RunResult& res) {
  const Eigen::Index m = max_input_dim(res);
  std::ostringstream out;
  CsvWriter w(out);
  w.cell("agent").cell("k");
  for (Eigen::Index i = 0; i < m; ++i) w.cell("u_unc" + std::to_string(i + 1));
  w.cell("delta_w_unc").cell("constraint_active").cell("w_ahead").cell("qbar1").cell("qbar2");
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) w.cell("D1_" + std::to_string(i + 1) + std::to_string(j + 1));
  }
  for (Eigen::Index i = 0; i < m; ++i) w.cell("D2_" + std::to_string(i + 1));
  w.cell("D3").end();
  for (const auto& r : res.records) {
    const Eigen::Index mi = r.u.size();
    w.integer(r.agent).integer(r.k);
    for (Eigen::Index i = 0; i < m; ++i) i < mi ? w.num(r.u_unconstrained(i)) : w.cell("");
    w.num(r.delta_w_unconstrained).flag(r.constraint_active).num(r.w_ahead);
    w.num(r.mass_center.x()).num(r.mass_center.y());
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) (i < mi && j < mi) ? w.num(r.gains.D1(i, j)) : w.cell("");
    }
    for (Eigen::Index i = 0; i < m; ++i) i < mi ? w.num(r.gains.D2(i)) : w.cell("");
    w.num(r.gains.D3).end();
  }
  return out.str();
}

inline std::string global_w_csv(const RunResult& res) {
  std::ostringstream out;
  CsvWriter w(out);
  w.cell("k").cell("w2").cell("subsampled").end();
  for (const auto& g : res.global_w) w.integer(g.k).num(g.w2).flag(g.subsampled).end();
  return out.str();
}

inline std::string reference_csv(const SampleCloud& cloud) {
  std::ostringstream out;
  CsvWriter w(out);
  w.cell("x").cell("y").cell("weight").end();
  for (std::size_t j = 0; j < cloud.size(); ++j) w.num(cloud.positions[j].x()).num(cloud.positions[j].y()).num(cloud.weights[j]).end();
  return out.str();
}

inline bool parse_flag(const std::string& s, const std::string& where) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw InputError(where + ": expected 0 or 1");
}

/// StepRecords rebuilt from metrics.csv (fields the file carries).
inline std::vector<StepRecord> parse_metrics(const Table& t, const std::string& source = "metrics.csv") {
  const std::size_t c_agent = t.column("agent"), c_k = t.column("k"), c_dw = t.column("delta_w");
  const std::size_t c_lw = t.column("local_w"), c_in = t.column("in_range"), c_ne = t.column("range_nonempty");
  const std::size_t c_ce = t.column("comm_events"), c_a = t.column("stageA_ms"), c_b = t.column("stageB_ms");
  const std::size_t c_c = t.column("stageC_ms"), c_bv = t.column("bound_violation");
  std::vector<std::size_t> c_u;
  for (int i = 1; t.has_column("u" + std::to_string(i)); ++i) c_u.push_back(t.column("u" + std::to_string(i)));

  std::vector<StepRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string where = source + " row " + std::to_string(i + 1);
    StepRecord r;
    r.agent = static_cast<int>(parse_number(row[c_agent], where));
    r.k = static_cast<int>(parse_number(row[c_k], where));
    std::vector<double> u;
    for (std::size_t c : c_u) {
      if (!row[c].empty()) u.push_back(parse_number(row[c], where));
    }
    r.u = Eigen::Map<Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
    r.delta_w = parse_number(row[c_dw], where);
    r.local_w = parse_number(row[c_lw], where);
    r.in_range = parse_flag(row[c_in], where);
    r.range_nonempty = parse_flag(row[c_ne], where);
    r.comm_events = static_cast<std::size_t>(parse_number(row[c_ce], where));
    r.stage_a_ms = parse_number(row[c_a], where);
    r.stage_b_ms = parse_number(row[c_b], where);
    r.stage_c_ms = parse_number(row[c_c], where);
    r.bound_violation = parse_flag(row[c_bv], where);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<GlobalWSample> parse_global_w(const Table& t, const std::string& source = "global_w.csv") {
  const std::size_t c_k = t.column("k"), c_w = t.column("w2"), c_s = t.column("subsampled");
  std::vector<GlobalWSample> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string where = source + " row " + std::to_string(i + 1);
    out.push_back({static_cast<int>(parse_number(t.rows[i][c_k], where)), parse_number(t.rows[i][c_w], where),
                   parse_flag(t.rows[i][c_s], where)});
  }
  return out;
}

}  // namespace dpc::io
