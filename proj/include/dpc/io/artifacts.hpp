#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <system_error>

#include <json.hpp>

#include "dpc/io/csv.hpp"
#include "dpc/io/scenario.hpp"
#include "dpc/io/svg.hpp"

namespace dpc::io {

/// File name -> contents, written together or not at all.
using FileSet = std::map<std::string, std::string>;

inline std::string run_info_json(const LoadedScenario& ls, const RunResult& res) {
  nlohmann::ordered_json info;
  info["schema_version"] = kSchemaVersion;
  info["seed"] = ls.scenario.seed;
  info["alpha"] = res.alpha;
  info["steps"] = res.steps;
  info["reference"] = {{"source", ls.reference_source}, {"points", ls.scenario.reference.size()}};
  auto agents = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < ls.scenario.agents.size(); ++r) {
    const auto& a = ls.scenario.agents[r];
    agents.push_back({{"system", ls.system_names[r]},
                      {"relative_degree", a.system.relative_degree()},
                      {"inputs", a.system.input_dim()},
                      {"constrained", a.system.input_constraints().has_value()},
                      {"budget", a.budget},
                      {"steps_taken", res.trajectories[r].size()},
                      {"initial_position", {res.initial_positions[r].x(), res.initial_positions[r].y()}}});
  }
  info["agents"] = agents;
  std::size_t clamped = 0;
  auto exhausted = nlohmann::ordered_json::array();
  for (const auto& e : res.events) {
    if (e.kind == Event::Kind::state_clamped) {
      ++clamped;
    } else {
      exhausted.push_back({{"agent", e.agent}, {"k", e.k}});
    }
  }
  info["events"] = {{"state_clamped", clamped}, {"exhausted", exhausted}};
  info["simulated_comm_ms"] = res.simulated_comm_ms;
  return info.dump(2) + "\n";
}

inline FileSet run_artifacts(const LoadedScenario& ls, const RunResult& res) {
  return {{"trajectories.csv", trajectories_csv(res)},
          {"metrics.csv", metrics_csv(res)},
          {"global_w.csv", global_w_csv(res)},
          {"control.csv", control_csv(res)},
          {"reference.csv", reference_csv(ls.scenario.reference)},
          {"run_info.json", run_info_json(ls, res)}};
}

/// Stages every file under a temporary name, then renames them into place.
inline void write_files(const std::filesystem::path& dir, const FileSet& files) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory '" + dir.string() + "'");
  std::vector<fs::path> staged;
  auto cleanup = [&] {
    for (const auto& p : staged) fs::remove(p, ec);
  };
  for (const auto& [name, content] : files) {
    const fs::path tmp = dir / ("." + name + ".partial");
    staged.push_back(tmp);
    std::ofstream out(tmp, std::ios::binary);
    out << content;
    out.close();
    if (!out) {
      cleanup();
      throw InputError("cannot write '" + (dir / name).string() + "'");
    }
  }
  for (const auto& [name, content] : files) {
    fs::rename(dir / ("." + name + ".partial"), dir / name, ec);
    if (ec) {
      cleanup();
      throw InputError("cannot move '" + name + "' into place: " + ec.message());
    }
  }
}

enum class PlotKind { trajectories, deltaw, ellipses, globalw };

inline PlotKind parse_plot_kind(const std::string& s) {
  if (s == "trajectories") return PlotKind::trajectories;
  if (s == "deltaw") return PlotKind::deltaw;
  if (s == "ellipses") return PlotKind::ellipses;
  if (s == "globalw") return PlotKind::globalw;
  throw InputError("unknown plot kind '" + s + "' (trajectories, deltaw, ellipses, globalw)");
}

namespace detail {

inline Table table_in(const std::filesystem::path& dir, const char* name) {
  const auto p = dir / name;
  if (!std::filesystem::exists(p)) throw InputError("missing '" + p.string() + "'; run first");
  return read_table(p.string());
}

inline std::vector<Point> initial_positions(const std::filesystem::path& dir) {
  const auto p = dir / "run_info.json";
  std::ifstream in(p);
  if (!in) throw InputError("missing '" + p.string() + "'; run first");
  nlohmann::json info;
  try {
    info = nlohmann::json::parse(in);
    std::vector<Point> out;
    for (const auto& a : info.at("agents")) {
      out.emplace_back(a.at("initial_position").at(0).get<double>(), a.at("initial_position").at(1).get<double>());
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

inline int cell_int(const Table& t, std::size_t row, std::size_t col, const std::string& src) {
  return static_cast<int>(parse_number(t.rows[row][col], src + " row " + std::to_string(row + 1)));
}

}  // namespace detail

/// Renders one plot from the CSVs a run left in `dir`.
inline std::string render_plot(const std::filesystem::path& dir, PlotKind kind, const Window& win, int agent = 0) {
  using detail::cell_int;
  if (win.lo > win.hi) throw InputError("plot: empty window");
  switch (kind) {
    case PlotKind::trajectories: {
      const Table ref = detail::table_in(dir, "reference.csv");
      const Table tr = detail::table_in(dir, "trajectories.csv");
      std::vector<Point> pts;
      std::vector<double> w;
      const auto cx = ref.column("x"), cy = ref.column("y"), cw = ref.column("weight");
      for (const auto& row : ref.rows) {
        pts.emplace_back(parse_number(row[cx], "reference.csv"), parse_number(row[cy], "reference.csv"));
        w.push_back(parse_number(row[cw], "reference.csv"));
      }
      const auto ca = tr.column("agent"), ck = tr.column("k"), c1 = tr.column("y1"), c2 = tr.column("y2");
      std::vector<TrajectoryPoint> traj;
      for (std::size_t i = 0; i < tr.rows.size(); ++i) {
        traj.push_back({cell_int(tr, i, ca, "trajectories.csv"), cell_int(tr, i, ck, "trajectories.csv"),
                        Point(parse_number(tr.rows[i][c1], "trajectories.csv"), parse_number(tr.rows[i][c2], "trajectories.csv"))});
      }
      if (traj.empty()) throw InputError("plot: trajectory file is empty");
      return plot_trajectories(pts, w, traj, detail::initial_positions(dir), win);
    }
    case PlotKind::deltaw: {
      const Table m = detail::table_in(dir, "metrics.csv");
      const Table c = detail::table_in(dir, "control.csv");
      if (m.rows.size() != c.rows.size()) throw InputError("plot: metrics.csv and control.csv disagree");
      const auto ca = m.column("agent"), ck = m.column("k"), cd = m.column("delta_w"), cu = c.column("delta_w_unc");
      std::vector<DeltaWPoint> pts;
      int agents = 0;
      for (std::size_t i = 0; i < m.rows.size(); ++i) {
        DeltaWPoint p{cell_int(m, i, ca, "metrics.csv"), cell_int(m, i, ck, "metrics.csv"),
                      parse_number(m.rows[i][cd], "metrics.csv"), parse_number(c.rows[i][cu], "control.csv")};
        agents = std::max(agents, p.agent + 1);
        pts.push_back(p);
      }
      return plot_delta_w(pts, static_cast<std::size_t>(agents), win);
    }
    case PlotKind::ellipses: {
      const Table m = detail::table_in(dir, "metrics.csv");
      const Table c = detail::table_in(dir, "control.csv");
      if (m.rows.size() != c.rows.size()) throw InputError("plot: metrics.csv and control.csv disagree");
      if (!m.has_column("u2") || m.has_column("u3")) throw InputError("plot: ellipses need a 2-dimensional input");
      const std::size_t ca = m.column("agent"), ck = m.column("k");
      const std::size_t mu[2] = {m.column("u1"), m.column("u2")};
      const std::size_t cu[2] = {c.column("u_unc1"), c.column("u_unc2")};
      const std::size_t d1[4] = {c.column("D1_11"), c.column("D1_12"), c.column("D1_21"), c.column("D1_22")};
      const std::size_t d2[2] = {c.column("D2_1"), c.column("D2_2")};
      const std::size_t d3 = c.column("D3");
      std::vector<EllipseStep> steps;
      for (std::size_t i = 0; i < m.rows.size(); ++i) {
        if (cell_int(m, i, ca, "metrics.csv") != agent || !win.contains(cell_int(m, i, ck, "metrics.csv"))) continue;
        const auto& mr = m.rows[i];
        const auto& cr = c.rows[i];
        EllipseStep s;
        s.k = cell_int(m, i, ck, "metrics.csv");
        s.u = Vector(Eigen::Vector2d(parse_number(mr[mu[0]], "metrics.csv"), parse_number(mr[mu[1]], "metrics.csv")));
        s.u_unc = Vector(Eigen::Vector2d(parse_number(cr[cu[0]], "control.csv"), parse_number(cr[cu[1]], "control.csv")));
        s.gains.D1.resize(2, 2);
        s.gains.D1 << parse_number(cr[d1[0]], "control.csv"), parse_number(cr[d1[1]], "control.csv"),
            parse_number(cr[d1[2]], "control.csv"), parse_number(cr[d1[3]], "control.csv");
        s.gains.D2.resize(2);
        s.gains.D2 << parse_number(cr[d2[0]], "control.csv"), parse_number(cr[d2[1]], "control.csv");
        s.gains.D3 = parse_number(cr[d3], "control.csv");
        steps.push_back(std::move(s));
      }
      return plot_ellipses(steps, agent);
    }
    case PlotKind::globalw: {
      const Table g = detail::table_in(dir, "global_w.csv");
      std::vector<std::pair<int, double>> series;
      for (const auto& s : parse_global_w(g)) series.emplace_back(s.k, s.w2);
      return plot_global_w(series, win);
    }
  }
  throw InputError("plot: unknown kind");
}

inline std::string plot_file_name(PlotKind kind) {
  switch (kind) {
    case PlotKind::trajectories: return "trajectories.svg";
    case PlotKind::deltaw: return "deltaw.svg";
    case PlotKind::ellipses: return "ellipses.svg";
    case PlotKind::globalw: return "globalw.svg";
  }
  return "plot.svg";
}

}  // namespace dpc::io
