#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "dpc/errors.hpp"
#include "dpc/numerics/linalg.hpp"

namespace dpc {

using WeightVector = std::vector<double>;

/// Weights below this are stored as exactly zero.
inline constexpr double kWeightFloor = 1e-12;

inline double snap_weight(double w) { return w < kWeightFloor ? 0.0 : w; }

/// Reference distribution: sample-point positions with their initial weights (sum 1).
struct SampleCloud {
  std::vector<Point> positions;
  WeightVector weights;

  std::size_t size() const { return positions.size(); }
};

/// Each agent starts from its own copy of the reference weights.
inline std::vector<WeightVector> replicate_weights(const SampleCloud& cloud, std::size_t agents) {
  return std::vector<WeightVector>(agents, cloud.weights);
}

struct Domain {
  double x_min = 0.0;
  double x_max = 100.0;
  double y_min = 0.0;
  double y_max = 100.0;

  bool contains(const Point& p) const {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max;
  }
};

struct MixtureComponent {
  Point mean;
  Eigen::Matrix2d covariance;
  double weight = 1.0;
};

struct MixtureSpec {
  std::vector<MixtureComponent> components;
  std::size_t n_samples = 1;
  std::uint64_t seed = 0;
  Domain domain;
};

namespace detail {

// Platform-independent draws on top of mt19937_64 (whose output is fully specified).
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace detail

/**
 * Draws n_samples points from a planar Gaussian mixture, re-drawing any point
 * that falls outside the domain. Deterministic for a given seed. Every point
 * gets weight 1/n.
 */
inline SampleCloud sample_mixture(const MixtureSpec& spec) {
  if (spec.components.empty()) throw InputError("mixture: no components");
  if (spec.n_samples < 1) throw InputError("mixture: n_samples must be at least 1");
  const Domain& dom = spec.domain;
  if (!(dom.x_min < dom.x_max) || !(dom.y_min < dom.y_max)) throw InputError("mixture: empty domain");

  double total = 0.0;
  std::vector<Eigen::Matrix2d> factors;
  for (const auto& c : spec.components) {
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight)) throw InputError("mixture: invalid mixing weight");
    if (!c.mean.allFinite() || !c.covariance.allFinite()) throw InputError("mixture: non-finite component");
    if (std::abs(c.covariance(0, 1) - c.covariance(1, 0)) > 1e-12 * (1.0 + c.covariance.cwiseAbs().maxCoeff())) {
      throw InputError("mixture: covariance not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(c.covariance, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || lo < 1e-12 * hi) throw InputError("mixture: degenerate covariance");
    factors.push_back(Eigen::LLT<Eigen::Matrix2d>(c.covariance).matrixL());
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InputError("mixture: mixing weights must sum to 1");

  detail::Sampler rng(spec.seed);
  SampleCloud cloud;
  cloud.positions.reserve(spec.n_samples);
  const std::size_t max_draws = 1000 * spec.n_samples + 100000;
  std::size_t draws = 0;
  while (cloud.positions.size() < spec.n_samples) {
    if (++draws > max_draws) throw InputError("mixture: domain rejects nearly all samples");
    const double pick = rng.uniform() * total;
    std::size_t idx = 0;
    double acc = spec.components[0].weight;
    while (pick >= acc && idx + 1 < spec.components.size()) acc += spec.components[++idx].weight;
    const double z0 = rng.normal();
    const double z1 = rng.normal();
    const Point p = spec.components[idx].mean + factors[idx] * Point(z0, z1);
    if (dom.contains(p)) cloud.positions.push_back(p);
  }
  cloud.weights.assign(spec.n_samples, 1.0 / static_cast<double>(spec.n_samples));
  return cloud;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/**
 * Reads a point-cloud CSV: rows "x,y" or "x,y,weight", optional header line.
 * Weights are normalized to sum 1; without a weight column they are uniform.
 */
inline SampleCloud load_points(std::istream& in, const std::string& source = "<stream>") {
  SampleCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = detail::trim(line);
    if (view.empty()) continue;
    const auto fields = detail::split(view);
    const std::string where = source + ":" + std::to_string(line_no);
    double first = 0.0;
    if (first_content && !detail::parse_double(fields[0], first)) {
      first_content = false;  // header
      continue;
    }
    first_content = false;
    if (fields.size() != 2 && fields.size() != 3) throw InputError(where + ": expected 2 or 3 columns");
    if (columns == 0) columns = fields.size();
    if (fields.size() != columns) throw InputError(where + ": inconsistent column count");
    double vals[3] = {0.0, 0.0, 1.0};
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!detail::parse_double(fields[i], vals[i])) throw InputError(where + ": unparsable number");
      if (!std::isfinite(vals[i])) throw InputError(where + ": non-finite value");
    }
    if (vals[2] < 0.0) throw InputError(where + ": negative weight");
    cloud.positions.emplace_back(vals[0], vals[1]);
    cloud.weights.push_back(vals[2]);
  }
  if (cloud.positions.empty()) throw InputError(source + ": no points");
  double total = 0.0;
  for (double w : cloud.weights) total += w;
  if (!(total > 0.0)) throw InputError(source + ": weights sum to zero");
  for (double& w : cloud.weights) w /= total;
  return cloud;
}

inline SampleCloud load_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open point file '" + path + "'");
  return load_points(in, path);
}

/// Per-step agent-point mass 1 / sum_r M_r.
inline double agent_alpha(const std::vector<int>& budgets) {
  if (budgets.empty()) throw InputError("agent_alpha: no agents");
  double total = 0.0;
  for (int m : budgets) {
    if (m < 1) throw InputError("agent_alpha: budgets must be at least 1");
    total += m;
  }
  return 1.0 / total;
}

}  // namespace dpc
