#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpc/errors.hpp"
#include "dpc/numerics/linalg.hpp"

namespace dpc {

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

/// Polyhedral input set {u : Cu u <= Du}.
struct InputConstraints {
  Matrix Cu;
  Vector Du;
};

/// |u_i| <= u_max written as [-I; I] u <= u_max.
inline InputConstraints box_constraints(Eigen::Index m, double u_max) {
  InputConstraints box;
  box.Cu.resize(2 * m, m);
  box.Cu << -Matrix::Identity(m, m), Matrix::Identity(m, m);
  box.Du = Vector::Constant(2 * m, u_max);
  return box;
}

/**
 * Smallest P >= 1 with ||C A^(P-1) B|| above tol * ||C|| ||A||^(P-1) ||B||.
 * Searches up to P = n and throws InputError if the output never sees the input.
 */
inline int relative_degree(const Matrix& a, const Matrix& b, const Matrix& c, double tol = 1e-10) {
  const auto n = a.rows();
  if (a.cols() != n || b.rows() != n || c.cols() != n) {
    throw InputError("relative_degree: inconsistent dimensions");
  }
  const double na = a.norm();
  const double nb = b.norm();
  const double nc = c.norm();
  Matrix ak_b = b;
  double scale = nb * nc;
  for (Eigen::Index i = 0; i < std::max<Eigen::Index>(n, 1); ++i) {
    const double prod = (c * ak_b).norm();
    if (prod > tol * scale) return static_cast<int>(i) + 1;
    ak_b = a * ak_b;
    scale *= na;
  }
  throw InputError("relative_degree: output unreachable from input");
}

/// Discrete-time LTI agent model x' = A x + B u, y = C x.
class LtiSystem {
 public:
  static LtiSystem create(Matrix a, Matrix b, Matrix c, double dt, std::vector<Interval> state_bounds = {},
                          std::optional<InputConstraints> input = std::nullopt) {
    const auto n = a.rows();
    if (a.cols() != n || n == 0) throw InputError("A must be square and nonempty");
    if (b.rows() != n || b.cols() == 0) throw InputError("B must have n rows and at least one column");
    if (c.cols() != n || c.rows() == 0) throw InputError("C must have n columns and at least one row");
    numerics::require_finite(a, "A");
    numerics::require_finite(b, "B");
    numerics::require_finite(c, "C");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("dt must be positive");
    if (numerics::rank(b) != b.cols()) throw InputError("B must have full column rank");
    if (numerics::rank(c) != c.rows()) throw InputError("C must have full row rank");
    if (!state_bounds.empty()) {
      if (static_cast<Eigen::Index>(state_bounds.size()) != n) throw InputError("state_bounds must have n entries");
      for (const auto& iv : state_bounds) {
        if (!(iv.lo <= iv.hi)) throw InputError("state_bounds interval with lo > hi");
      }
    }
    if (input) {
      if (input->Cu.cols() != b.cols() || input->Cu.rows() != input->Du.size()) {
        throw InputError("input constraints: Cu must be c x m and Du length c");
      }
      numerics::require_finite(input->Cu, "Cu");
      numerics::require_finite(input->Du, "Du");
    }

    LtiSystem sys;
    sys.p_ = dpc::relative_degree(a, b, c);
    sys.markov_ = c * numerics::matrix_power(a, sys.p_ - 1) * b;
    sys.c_ap_ = c * numerics::matrix_power(a, sys.p_);
    sys.a_ = std::move(a);
    sys.b_ = std::move(b);
    sys.c_ = std::move(c);
    sys.dt_ = dt;
    sys.state_bounds_ = std::move(state_bounds);
    sys.input_ = std::move(input);
    return sys;
  }

  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  const Matrix& C() const { return c_; }
  double dt() const { return dt_; }
  int relative_degree() const { return p_; }
  Eigen::Index state_dim() const { return a_.rows(); }
  Eigen::Index input_dim() const { return b_.cols(); }
  Eigen::Index output_dim() const { return c_.rows(); }
  const std::vector<Interval>& state_bounds() const { return state_bounds_; }
  const std::optional<InputConstraints>& input_constraints() const { return input_; }

  /// C A^(P-1) B, the first nonzero Markov parameter.
  const Matrix& markov() const { return markov_; }
  /// C A^P
  const Matrix& output_free_response() const { return c_ap_; }

  LtiSystem with_input_constraints(std::optional<InputConstraints> input) const {
    return create(a_, b_, c_, dt_, state_bounds_, std::move(input));
  }
  LtiSystem without_state_bounds() const { return create(a_, b_, c_, dt_, {}, input_); }

 private:
  LtiSystem() = default;

  Matrix a_;
  Matrix b_;
  Matrix c_;
  double dt_ = 0.0;
  int p_ = 1;
  Matrix markov_;
  Matrix c_ap_;
  std::vector<Interval> state_bounds_;
  std::optional<InputConstraints> input_;
};

struct Propagation {
  Vector x;
  bool clamped = false;  // a state bound was hit and enforced
};

/// One Euler step; state bounds, when present, are enforced by clamping.
inline Propagation step(const LtiSystem& sys, const Vector& x, const Vector& u) {
  if (x.size() != sys.state_dim()) throw InputError("step: state dimension mismatch");
  if (u.size() != sys.input_dim()) throw InputError("step: input dimension mismatch");
  if (!u.allFinite()) throw InputError("step: non-finite input");
  Propagation out{sys.A() * x + sys.B() * u, false};
  const auto& bounds = sys.state_bounds();
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    double& v = out.x(static_cast<Eigen::Index>(i));
    const double clamped = std::clamp(v, bounds[i].lo, bounds[i].hi);
    if (clamped != v) {
      v = clamped;
      out.clamped = true;
    }
  }
  return out;
}

inline Vector output(const LtiSystem& sys, const Vector& x) {
  if (x.size() != sys.state_dim()) throw InputError("output: state dimension mismatch");
  return sys.C() * x;
}

enum class Preset { first_order, planar_quadrotor };

inline Preset parse_preset(std::string_view name) {
  if (name == "first_order") return Preset::first_order;
  if (name == "planar_quadrotor") return Preset::planar_quadrotor;
  throw InputError("unknown preset '" + std::string(name) + "'");
}

inline std::string_view preset_name(Preset p) {
  return p == Preset::first_order ? "first_order" : "planar_quadrotor";
}

struct PresetParams {
  double gravity = 9.81;     // m/s^2
  double inertia_xx = 0.1;   // kg m^2
  double inertia_yy = 0.1;   // kg m^2
  double max_angle = 0.52;   // rad
  double max_rate = 10.47;   // rad/s
  double max_speed = 5.0;    // m/s
  double max_torque = 100.0; // N m
};

namespace quadrotor {
// State layout (phi, theta, dphi, dtheta, dpx, dpy, px, py); input (tau_x, tau_y).
enum Index : Eigen::Index { phi = 0, theta, dphi, dtheta, dpx, dpy, px, py };
}  // namespace quadrotor

/**
 * Scenario models.
 *
 * first_order: x' = x + u, y = x (planar single integrator, P = 1).
 *
 * planar_quadrotor: Euler-discretized chain torque -> angular rate -> angle ->
 * per-step displacement -> position, P = 4. dphi/dtheta are rates; dpx/dpy are
 * per-step position changes, so their speed bound is scaled by dt. Roll drives
 * y, pitch drives x. Carries the angle/rate/speed bounds and |tau| <= max_torque.
 */
inline LtiSystem make_preset(Preset preset, double dt, const PresetParams& params = {}) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("preset: dt must be positive");
  if (preset == Preset::first_order) {
    const Matrix eye = Matrix::Identity(2, 2);
    return LtiSystem::create(eye, eye, eye, dt);
  }

  if (!(params.inertia_xx > 0.0) || !(params.inertia_yy > 0.0)) throw InputError("preset: inertia must be positive");
  using namespace quadrotor;
  Matrix a = Matrix::Identity(8, 8);
  a(phi, dphi) = dt;
  a(theta, dtheta) = dt;
  a(dpx, theta) = params.gravity * dt;
  a(dpy, phi) = params.gravity * dt;
  a(px, dpx) = 1.0;
  a(py, dpy) = 1.0;

  Matrix b = Matrix::Zero(8, 2);
  b(dphi, 0) = dt / params.inertia_xx;
  b(dtheta, 1) = dt / params.inertia_yy;

  Matrix c = Matrix::Zero(2, 8);
  c(0, px) = 1.0;
  c(1, py) = 1.0;

  const double inf = std::numeric_limits<double>::infinity();
  const double step_speed = params.max_speed * dt;
  std::vector<Interval> bounds = {
      {-params.max_angle, params.max_angle}, {-params.max_angle, params.max_angle},
      {-params.max_rate, params.max_rate},   {-params.max_rate, params.max_rate},
      {-step_speed, step_speed},             {-step_speed, step_speed},
      {-inf, inf},                           {-inf, inf}};
  return LtiSystem::create(std::move(a), std::move(b), std::move(c), dt, std::move(bounds),
                           box_constraints(2, params.max_torque));
}

/// Minimum-norm state whose output is y (e.g. hover at a position).
inline Vector state_at_output(const LtiSystem& sys, const Vector& y) {
  if (y.size() != sys.output_dim()) throw InputError("state_at_output: output dimension mismatch");
  return numerics::pseudo_inverse(sys.C()) * y;
}

/// Per-agent simulation state: current x, visited outputs y^0..y^k, budget, per-step mass.
struct AgentState {
  Vector x;
  int k = 0;
  std::vector<Point> trajectory;
  int budget = 0;
  double alpha = 0.0;
};

}  // namespace dpc
