#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "dpc/controller.hpp"
#include "dpc/coordination.hpp"
#include "dpc/distribution.hpp"
#include "dpc/dynamics.hpp"
#include "dpc/transport.hpp"

namespace dpc {

struct AgentSpec {
  LtiSystem system;
  Vector x0;
  int budget = 1;
};

struct Scenario {
  std::vector<AgentSpec> agents;  // input constraints ride on each agent's system
  SampleCloud reference;
  CommConfig comm;
  int k_interval = 50;            // global W2 every K steps (and at the last step)
  std::size_t w_cap = 500;        // per-side cap for the exact W2 solver
  std::uint64_t seed = 0;
};

struct RunOptions {
  bool parallel = false;
  bool record_timing = true;
};

/// One agent, one step. Position y is the agent-point produced by the step.
struct StepRecord {
  int agent = 0;
  int k = 0;
  Point y = Point::Zero();
  Vector u;
  Vector u_unconstrained;
  double delta_w = 0.0;
  double delta_w_unconstrained = 0.0;
  double local_w = 0.0;  // W^(k|k), before the move
  double w_ahead = std::numeric_limits<double>::quiet_NaN();  // realized W^(k+P|k) on the same S^k
  bool in_range = false;
  bool range_nonempty = false;
  bool constraint_active = false;
  std::size_t comm_events = 0;
  double stage_a_ms = 0.0;
  double stage_b_ms = 0.0;
  double stage_c_ms = 0.0;
  bool bound_violation = false;
  bool exhausted = false;
  Point mass_center = Point::Zero();
  GainTerms gains;
  LocalSelection selection;
};

struct GlobalWSample {
  int k = 0;
  double w2 = 0.0;
  bool subsampled = false;
};

struct Event {
  enum class Kind { state_clamped, exhausted };
  Kind kind = Kind::state_clamped;
  int k = 0;
  int agent = 0;
};

struct RunResult {
  std::vector<std::vector<Point>> trajectories;  // agent-points y^1..y^M per agent
  std::vector<std::vector<double>> point_masses;  // mass carried by each agent-point
  std::vector<Point> initial_positions;
  std::vector<StepRecord> records;                // ordered by (k, agent)
  std::vector<GlobalWSample> global_w;
  std::vector<Event> events;
  std::vector<WeightVector> final_weights;
  double alpha = 0.0;
  int steps = 0;
  double simulated_comm_ms = 0.0;
};

/// Throws InfeasibleError when the system's input polytope is empty.
inline void check_input_feasible(const LtiSystem& sys) {
  if (const auto& box = sys.input_constraints()) {
    const auto m = sys.input_dim();
    numerics::solve_psd_qp({Matrix::Zero(m, m), Vector::Zero(m), box->Cu, box->Du});
  }
}

inline void validate(const Scenario& sc) {
  if (sc.agents.empty()) throw InputError("scenario: no agents");
  if (sc.reference.positions.empty()) throw InputError("scenario: empty reference cloud");
  if (sc.reference.positions.size() != sc.reference.weights.size()) throw InputError("scenario: reference size mismatch");
  if (sc.k_interval < 1) throw InputError("scenario: global W interval must be at least 1");
  if (sc.w_cap < 1) throw InputError("scenario: W cap must be at least 1");
  validate(sc.comm);
  for (std::size_t r = 0; r < sc.agents.size(); ++r) {
    const auto& a = sc.agents[r];
    const std::string who = "scenario: agent " + std::to_string(r + 1);
    if (a.budget < 1) throw InputError(who + " budget must be at least 1");
    if (a.x0.size() != a.system.state_dim()) throw InputError(who + " initial state has wrong dimension");
    if (!a.x0.allFinite()) throw InputError(who + " initial state is not finite");
    if (a.system.output_dim() != 2) throw InputError(who + " output must be planar");
    check_input_feasible(a.system);
  }
}

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline Point to_point(const Vector& y) { return Point(y(0), y(1)); }

struct AgentContext {
  Vector x;
  Point center;
  bool active = true;
  int steps = 0;
};

struct AgentStepOutput {
  bool produced = false;
  StepRecord record;
  double mass = 0.0;
  bool went_exhausted = false;
  std::exception_ptr error;
};

}  // namespace detail

/**
 * Runs the coverage loop: for every step each active agent does Stage A,
 * propagates its dynamics and does Stage B on its own weights; then one
 * Stage C round over all agents (inactive ones included). Agents stop after
 * their budget or on exhaustion; the run stops when no agent is active or the
 * reference mass is used up.
 */
inline RunResult run(const Scenario& sc, const RunOptions& opt = {}) {
  validate(sc);
  const std::size_t n_agents = sc.agents.size();
  std::vector<int> budgets;
  for (const auto& a : sc.agents) budgets.push_back(a.budget);
  const double alpha = agent_alpha(budgets);
  const int k_max = *std::max_element(budgets.begin(), budgets.end());
  const auto& positions = sc.reference.positions;

  RunResult res;
  res.alpha = alpha;
  res.trajectories.resize(n_agents);
  res.point_masses.resize(n_agents);
  std::vector<WeightVector> weights = replicate_weights(sc.reference, n_agents);
  std::vector<detail::AgentContext> ctx(n_agents);
  std::vector<Point> current(n_agents);
  std::vector<std::vector<std::size_t>> record_index(n_agents);
  for (std::size_t r = 0; r < n_agents; ++r) {
    ctx[r].x = sc.agents[r].x0;
    ctx[r].center = detail::to_point(output(sc.agents[r].system, ctx[r].x));
    current[r] = ctx[r].center;
    res.initial_positions.push_back(current[r]);
  }

  WeightedCloud reference{positions, sc.reference.weights};
  auto agent_step = [&](std::size_t r, int k) {
    detail::AgentStepOutput out;
    try {
      auto& c = ctx[r];
      if (!c.active) return out;
      const auto& sys = sc.agents[r].system;
      const InputConstraints* box = sys.input_constraints() ? &*sys.input_constraints() : nullptr;

      auto t0 = std::chrono::steady_clock::now();
      ControlDecision dec;
      try {
        dec = stage_a(sys, c.x, weights[r], positions, c.center, alpha, box);
      } catch (const Exhausted&) {
        c.active = false;
        out.went_exhausted = true;
        return out;
      }
      const double ta = opt.record_timing ? detail::elapsed_ms(t0) : 0.0;

      const Propagation prop = step(sys, c.x, dec.u);
      c.x = prop.x;
      const Point y = detail::to_point(output(sys, c.x));

      t0 = std::chrono::steady_clock::now();
      const double available = std::accumulate(weights[r].begin(), weights[r].end(), 0.0);
      const double demand = dec.selection.exhausted ? std::min(alpha, available) : alpha;
      apply_plan(weights[r], weight_update(positions, weights[r], y, demand));
      const double tb = opt.record_timing ? detail::elapsed_ms(t0) : 0.0;

      c.center = dec.selection.mass_center;
      ++c.steps;
      if (dec.selection.exhausted) {
        c.active = false;
        out.went_exhausted = true;
      }
      if (c.steps >= sc.agents[r].budget) c.active = false;

      StepRecord& rec = out.record;
      rec.agent = static_cast<int>(r);
      rec.k = k;
      rec.y = y;
      rec.u = dec.u;
      rec.u_unconstrained = dec.u_unconstrained;
      rec.delta_w = dec.delta_w_pred;
      rec.delta_w_unconstrained = dec.delta_w_unconstrained;
      rec.local_w = dec.local_w;
      rec.in_range = dec.in_convergence_range;
      rec.range_nonempty = dec.range_nonempty;
      rec.constraint_active = dec.constraint_active;
      rec.stage_a_ms = ta;
      rec.stage_b_ms = tb;
      rec.bound_violation = prop.clamped;
      rec.exhausted = dec.selection.exhausted;
      rec.mass_center = dec.selection.mass_center;
      rec.gains = std::move(dec.gains);
      rec.selection = std::move(dec.selection);
      out.mass = demand;
      out.produced = true;
    } catch (...) {
      out.error = std::current_exception();
    }
    return out;
  };

  for (int k = 1; k <= k_max; ++k) {
    std::vector<detail::AgentStepOutput> outs(n_agents);
    if (opt.parallel && n_agents > 1) {
      std::vector<std::jthread> workers;
      for (std::size_t r = 1; r < n_agents; ++r) workers.emplace_back([&, r] { outs[r] = agent_step(r, k); });
      outs[0] = agent_step(0, k);
    } else {
      for (std::size_t r = 0; r < n_agents; ++r) outs[r] = agent_step(r, k);
    }

    const std::size_t first_record = res.records.size();
    for (std::size_t r = 0; r < n_agents; ++r) {
      auto& o = outs[r];
      if (o.error) std::rethrow_exception(o.error);
      if (o.went_exhausted) res.events.push_back({Event::Kind::exhausted, k, static_cast<int>(r)});
      if (!o.produced) continue;
      if (o.record.bound_violation) res.events.push_back({Event::Kind::state_clamped, k, static_cast<int>(r)});
      current[r] = o.record.y;
      res.trajectories[r].push_back(o.record.y);
      res.point_masses[r].push_back(o.mass);
      record_index[r].push_back(res.records.size());
      res.records.push_back(std::move(o.record));
    }

    const auto t0 = std::chrono::steady_clock::now();
    const SyncResult sync = sync_round(weights, current, sc.comm, sc.seed + static_cast<std::uint64_t>(k));
    const double tc = opt.record_timing ? detail::elapsed_ms(t0) : 0.0;
    res.simulated_comm_ms += sync.simulated_overhead_ms;
    for (std::size_t i = first_record; i < res.records.size(); ++i) {
      res.records[i].comm_events = sync.exchanges;
      res.records[i].stage_c_ms = tc / static_cast<double>(n_agents);
    }
    res.steps = k;

    const bool any_active = std::any_of(ctx.begin(), ctx.end(), [](const auto& c) { return c.active; });
    double remaining = 0.0;
    for (std::size_t j = 0; j < positions.size(); ++j) {
      double m = weights[0][j];
      for (std::size_t r = 1; r < n_agents; ++r) m = std::min(m, weights[r][j]);
      remaining += m;
    }
    const bool done = !any_active || remaining < 1e-9 || k == k_max;

    if (k % sc.k_interval == 0 || done) {
      WeightedCloud traj;
      for (std::size_t r = 0; r < n_agents; ++r) {
        traj.points.insert(traj.points.end(), res.trajectories[r].begin(), res.trajectories[r].end());
        traj.weights.insert(traj.weights.end(), res.point_masses[r].begin(), res.point_masses[r].end());
      }
      if (!traj.points.empty()) {
        const auto w = global_wasserstein(traj, reference, sc.w_cap, sc.seed * 1000003ULL);
        res.global_w.push_back({k, w.w2, w.subsampled});
      }
    }
    if (done) break;
  }

  // Realized W^(k+P|k): same selection, output P steps after the Stage A position.
  for (std::size_t r = 0; r < n_agents; ++r) {
    const int p = sc.agents[r].system.relative_degree();
    const auto& idx = record_index[r];
    for (std::size_t i = 0; i < idx.size(); ++i) {
      // Stage A of record i ran at position i - 1 (initial position for i = 0);
      // the output P steps later is agent-point i - 1 + P.
      const std::size_t target = i + static_cast<std::size_t>(p) - 1;
      if (target < res.trajectories[r].size()) {
        auto& rec = res.records[idx[i]];
        rec.w_ahead = local_wasserstein(rec.selection, res.trajectories[r][target]);
      }
    }
  }
  res.final_weights = std::move(weights);
  return res;
}

struct MetricsSummary {
  std::size_t records = 0;
  double fraction_negative_dw = 0.0;
  double monotone_window_fraction = 1.0;  // share of consecutive global-W pairs that do not increase
  double mean_stage_a_ms = 0.0;
  double mean_stage_b_ms = 0.0;
  double mean_stage_c_ms = 0.0;

  bool operator==(const MetricsSummary&) const = default;
};

/// Aggregates only quantities that appear in the exported CSVs.
inline MetricsSummary replay_metrics(const std::vector<StepRecord>& records, const std::vector<GlobalWSample>& global_w) {
  MetricsSummary s;
  s.records = records.size();
  if (!records.empty()) {
    std::size_t negative = 0;
    for (const auto& r : records) {
      if (r.delta_w < 0.0) ++negative;
      s.mean_stage_a_ms += r.stage_a_ms;
      s.mean_stage_b_ms += r.stage_b_ms;
      s.mean_stage_c_ms += r.stage_c_ms;
    }
    const double n = static_cast<double>(records.size());
    s.fraction_negative_dw = static_cast<double>(negative) / n;
    s.mean_stage_a_ms /= n;
    s.mean_stage_b_ms /= n;
    s.mean_stage_c_ms /= n;
  }
  if (global_w.size() >= 2) {
    std::size_t ok = 0;
    for (std::size_t i = 1; i < global_w.size(); ++i) {
      if (global_w[i].w2 <= global_w[i - 1].w2) ++ok;
    }
    s.monotone_window_fraction = static_cast<double>(ok) / static_cast<double>(global_w.size() - 1);
  }
  return s;
}

/// Share of steps (with a realized horizon) where W^(k+P|k) < W^(k|k).
inline double window_decrease_fraction(const std::vector<StepRecord>& records, int agent = -1) {
  std::size_t total = 0;
  std::size_t ok = 0;
  for (const auto& r : records) {
    if ((agent >= 0 && r.agent != agent) || std::isnan(r.w_ahead)) continue;
    ++total;
    if (r.w_ahead < r.local_w) ++ok;
  }
  return total == 0 ? 1.0 : static_cast<double>(ok) / static_cast<double>(total);
}

}  // namespace dpc
