#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "dpc/distribution.hpp"
#include "dpc/errors.hpp"
#include "dpc/numerics/transportation.hpp"

namespace dpc {

/// Local sample-points S^k claimed by one agent for one step.
struct LocalSelection {
  std::vector<std::size_t> indices;
  std::vector<double> taken;  // mass claimed from each selected point
  std::vector<Point> points;
  Point mass_center = Point::Zero();
  bool exhausted = false;  // fewer than alpha units of mass were left

  double mass() const { return std::accumulate(taken.begin(), taken.end(), 0.0); }
  bool empty() const { return indices.empty(); }
};

/// Claimed-mass weighted mean of the selected points.
inline Point mass_center(const LocalSelection& sel) {
  if (sel.empty()) throw InputError("mass_center: empty selection");
  if (sel.indices.size() == 1) return sel.points[0];
  Point acc = Point::Zero();
  double total = 0.0;
  for (std::size_t i = 0; i < sel.indices.size(); ++i) {
    acc += sel.taken[i] * sel.points[i];
    total += sel.taken[i];
  }
  if (!(total > 0.0)) throw InputError("mass_center: selection carries no mass");
  return acc / total;
}

/**
 * Greedy local sample-point selection.
 *
 * Points with positive weight are ranked by ||q_j - prev_center|| / beta_j
 * (ties: lower index first) and claimed in that order, the last one partially,
 * until alpha units of mass are collected. If less than alpha remains, all of
 * it is claimed and the selection is flagged exhausted. Throws Exhausted when
 * every weight is zero.
 */
inline LocalSelection select_local_samples(const WeightVector& weights, const std::vector<Point>& positions,
                                           const Point& prev_center, double alpha) {
  if (weights.size() != positions.size()) throw InputError("select_local_samples: size mismatch");
  if (!(alpha > 0.0)) throw InputError("select_local_samples: alpha must be positive");

  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(weights.size());
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] > 0.0) ranked.emplace_back((positions[j] - prev_center).norm() / weights[j], j);
  }
  if (ranked.empty()) throw Exhausted("select_local_samples: all sample weights are zero");
  std::sort(ranked.begin(), ranked.end());

  LocalSelection sel;
  double remaining = alpha;
  for (const auto& [dist, j] : ranked) {
    const double take = std::min(remaining, weights[j]);
    sel.indices.push_back(j);
    sel.taken.push_back(take);
    sel.points.push_back(positions[j]);
    remaining -= take;
    if (remaining == 0.0) break;
  }
  sel.exhausted = remaining > 0.0;
  sel.mass_center = mass_center(sel);
  return sel;
}

/// sqrt(sum_j taken_j ||y - q_j||^2)
inline double local_wasserstein(const LocalSelection& sel, const Point& agent_pos) {
  if (sel.empty()) throw InputError("local_wasserstein: empty selection");
  double acc = 0.0;
  for (std::size_t i = 0; i < sel.points.size(); ++i) acc += sel.taken[i] * (agent_pos - sel.points[i]).squaredNorm();
  return std::sqrt(acc);
}

/// Mass moved from each sample-point to the agent-point (dense, aligned with the cloud).
struct TransportPlan {
  WeightVector gammas;

  double mass() const { return std::accumulate(gammas.begin(), gammas.end(), 0.0); }
};

/**
 * Weight update LP: min sum gamma_j ||y - q_j||^2 s.t. 0 <= gamma_j <= beta_j,
 * sum gamma_j = alpha_next. Solved in closed form by filling the nearest points
 * first (ties: lower index). Throws Exhausted if alpha_next exceeds the
 * available mass by more than 1e-12.
 */
inline TransportPlan weight_update(const std::vector<Point>& positions, const WeightVector& weights,
                                   const Point& agent_pos, double alpha_next) {
  if (weights.size() != positions.size()) throw InputError("weight_update: size mismatch");
  if (!(alpha_next >= 0.0)) throw InputError("weight_update: negative demand");
  TransportPlan plan{WeightVector(weights.size(), 0.0)};
  if (alpha_next == 0.0) return plan;

  const double available = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (alpha_next > available + 1e-12) throw Exhausted("weight_update: demand exceeds remaining mass");

  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(weights.size());
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] > 0.0) ranked.emplace_back((positions[j] - agent_pos).squaredNorm(), j);
  }
  std::sort(ranked.begin(), ranked.end());
  double remaining = alpha_next;
  for (const auto& [d2, j] : ranked) {
    const double take = std::min(remaining, weights[j]);
    plan.gammas[j] = take;
    remaining -= take;
    if (remaining <= 0.0) break;
  }
  return plan;
}

/// beta <- beta - gamma, with tiny remainders snapped to zero.
inline void apply_plan(WeightVector& weights, const TransportPlan& plan) {
  if (weights.size() != plan.gammas.size()) throw InputError("apply_plan: size mismatch");
  for (std::size_t j = 0; j < weights.size(); ++j) {
    weights[j] = snap_weight(std::max(0.0, weights[j] - plan.gammas[j]));
  }
}

/// Planar points with nonnegative masses; normalization happens at evaluation.
struct WeightedCloud {
  std::vector<Point> points;
  std::vector<double> weights;
};

struct WassersteinResult {
  double w2 = 0.0;
  bool subsampled = false;
};

/**
 * Systematic resampling over the cumulative-weight axis down to `count`
 * equal-mass draws; repeated draws of a point are merged.
 */
inline WeightedCloud systematic_subsample(const WeightedCloud& cloud, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw InputError("systematic_subsample: count must be positive");
  const double total = std::accumulate(cloud.weights.begin(), cloud.weights.end(), 0.0);
  if (!(total > 0.0)) throw InputError("systematic_subsample: cloud carries no mass");
  detail::Sampler rng(seed);
  const double offset = rng.uniform();
  const double unit = 1.0 / static_cast<double>(count);

  WeightedCloud out;
  std::size_t drawn = 0;
  double cumulative = 0.0;
  for (std::size_t j = 0; j < cloud.points.size() && drawn < count; ++j) {
    cumulative += cloud.weights[j] / total;
    std::size_t hits = 0;
    while (drawn < count && (offset + static_cast<double>(drawn)) * unit < cumulative) {
      ++drawn;
      ++hits;
    }
    if (hits > 0) {
      out.points.push_back(cloud.points[j]);
      out.weights.push_back(static_cast<double>(hits) * unit);
    }
  }
  // Roundoff in the cumulative sum can strand the final draws.
  if (drawn < count) {
    for (std::size_t j = cloud.points.size(); j-- > 0;) {
      if (cloud.weights[j] > 0.0) {
        const double extra = static_cast<double>(count - drawn) * unit;
        if (!out.points.empty() && out.points.back() == cloud.points[j]) {
          out.weights.back() += extra;
        } else {
          out.points.push_back(cloud.points[j]);
          out.weights.push_back(extra);
        }
        break;
      }
    }
  }
  return out;
}

namespace detail {

inline WeightedCloud normalized_support(const WeightedCloud& c, const char* name) {
  if (c.points.size() != c.weights.size()) throw InputError(std::string(name) + ": size mismatch");
  WeightedCloud out;
  double total = 0.0;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    if (!(c.weights[i] >= 0.0) || !std::isfinite(c.weights[i]) || !c.points[i].allFinite()) {
      throw InputError(std::string(name) + ": invalid point or weight");
    }
    if (c.weights[i] > 0.0) {
      out.points.push_back(c.points[i]);
      out.weights.push_back(c.weights[i]);
      total += c.weights[i];
    }
  }
  if (out.points.empty()) throw InputError(std::string(name) + ": empty cloud");
  for (double& w : out.weights) w /= total;
  return out;
}

}  // namespace detail

/**
 * 2-Wasserstein distance between two weighted clouds, each renormalized to unit
 * mass. A side with more than `cap` points is first reduced by systematic
 * subsampling seeded with `seed`, and the result is flagged.
 */
inline WassersteinResult global_wasserstein(const WeightedCloud& a, const WeightedCloud& b, std::size_t cap = 500,
                                            std::uint64_t seed = 0) {
  WeightedCloud left = detail::normalized_support(a, "global_wasserstein lhs");
  WeightedCloud right = detail::normalized_support(b, "global_wasserstein rhs");
  WassersteinResult res;
  if (left.points.size() > cap) {
    left = systematic_subsample(left, cap, seed);
    res.subsampled = true;
  }
  if (right.points.size() > cap) {
    right = systematic_subsample(right, cap, seed ^ 0x9e3779b97f4a7c15ULL);
    res.subsampled = true;
  }
  numerics::TransportProblem tp;
  tp.supply = Eigen::Map<const Vector>(left.weights.data(), static_cast<Eigen::Index>(left.weights.size()));
  tp.demand = Eigen::Map<const Vector>(right.weights.data(), static_cast<Eigen::Index>(right.weights.size()));
  tp.cost = numerics::squared_distance_matrix(left.points, right.points);
  numerics::TransportOptions opt;
  opt.max_points = std::max<std::size_t>(cap, 1);
  const auto sol = numerics::solve_transport_exact(tp, opt);
  res.w2 = std::sqrt(std::max(0.0, sol.cost));
  return res;
}

}  // namespace dpc
