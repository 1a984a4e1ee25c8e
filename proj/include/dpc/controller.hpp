#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "dpc/dynamics.hpp"
#include "dpc/numerics/qp.hpp"
#include "dpc/transport.hpp"

namespace dpc {

/// Coefficients of the predicted change dW(u) = u'D1u + 2 D2 u + D3.
struct GainTerms {
  Matrix D1;     // m x m, symmetric PSD
  RowVector D2;  // 1 x m
  double D3 = 0.0;
};

/**
 * Builds D1..D3 for an agent at state x targeting mass center q_bar P steps ahead:
 *   D1 = a G'G,  D2 = a (C A^P x - q_bar)' G,
 *   D3 = a (|C A^P x|^2 - |C x|^2) - 2 a q_bar' (C A^P x - C x),
 * with G = C A^(P-1) B.
 */
inline GainTerms gain_terms(const LtiSystem& sys, const Vector& x, const Vector& q_bar, double alpha) {
  if (x.size() != sys.state_dim()) throw InputError("gain_terms: state dimension mismatch");
  if (q_bar.size() != sys.output_dim()) throw InputError("gain_terms: target dimension mismatch");
  if (!(alpha > 0.0)) throw InputError("gain_terms: alpha must be positive");
  const Matrix& g = sys.markov();
  const Vector free = sys.output_free_response() * x;
  const Vector y = sys.C() * x;

  GainTerms gt;
  const Matrix d1 = alpha * g.transpose() * g;
  gt.D1 = 0.5 * (d1 + d1.transpose());
  gt.D2 = alpha * (free - q_bar).transpose() * g;
  gt.D3 = alpha * (free.squaredNorm() - y.squaredNorm()) - 2.0 * alpha * q_bar.dot(free - y);
  return gt;
}

inline double delta_w(const GainTerms& gt, const Vector& u) {
  if (u.size() != gt.D1.rows()) throw InputError("delta_w: input dimension mismatch");
  return u.dot(gt.D1 * u) + 2.0 * gt.D2.dot(u) + gt.D3;
}

/// Minimum-norm member -D1^+ D2' of the optimal input set.
inline Vector optimal_input_unconstrained(const GainTerms& gt) {
  return -numerics::pseudo_inverse(gt.D1) * gt.D2.transpose();
}

/// argmin dW(u) over {Cu u <= Du}; minimum-norm among ties.
inline Vector optimal_input_constrained(const GainTerms& gt, const InputConstraints& box) {
  numerics::PsdQp qp{gt.D1, gt.D2.transpose(), box.Cu, box.Du};
  return numerics::solve_psd_qp(qp).u;
}

struct ConvergenceStatus {
  bool in_range = false;
  bool range_nonempty = false;
};

/// Radius term D2 D1^+ D2' - D3 of the convergence ellipsoid.
inline double convergence_radius_sq(const GainTerms& gt) {
  const Matrix pinv = numerics::pseudo_inverse(gt.D1);
  return gt.D2.dot(pinv * gt.D2.transpose()) - gt.D3;
}

/**
 * Strict test ||u + D1^+ D2'||^2_D1 < D2 D1^+ D2' - D3. Boundary points are
 * reported outside. The range counts as nonempty when the right-hand side is
 * nonnegative up to roundoff.
 */
inline ConvergenceStatus convergence_check(const GainTerms& gt, const Vector& u) {
  if (u.size() != gt.D1.rows()) throw InputError("convergence_check: input dimension mismatch");
  const Matrix pinv = numerics::pseudo_inverse(gt.D1);
  const Vector center = -pinv * gt.D2.transpose();
  const double quad = gt.D2.dot(pinv * gt.D2.transpose());
  const double rhs = quad - gt.D3;
  const Vector off = u - center;
  const double lhs = off.dot(gt.D1 * off);
  ConvergenceStatus st;
  st.in_range = lhs < rhs;
  st.range_nonempty = rhs >= -1e-12 * (std::abs(quad) + std::abs(gt.D3));
  return st;
}

/// Boundary samples of the convergence ellipse at angles 2*pi*i/n (m = 2, D1 full rank).
inline std::vector<Point> convergence_ellipse(const GainTerms& gt, std::size_t n_points) {
  if (gt.D1.rows() != 2 || gt.D1.cols() != 2) throw InputError("convergence_ellipse: requires a 2-dimensional input");
  if (numerics::rank(gt.D1) < 2) throw InputError("convergence_ellipse: D1 is rank-deficient, range unbounded");
  const Matrix pinv = numerics::pseudo_inverse(gt.D1);
  const Vector center = -pinv * gt.D2.transpose();
  const double quad = gt.D2.dot(pinv * gt.D2.transpose());
  double rhs = quad - gt.D3;
  if (rhs < -1e-12 * (std::abs(quad) + std::abs(gt.D3))) throw InputError("convergence_ellipse: range is empty");
  rhs = std::max(rhs, 0.0);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(Eigen::Matrix2d(gt.D1));
  const Eigen::Matrix2d axes = eig.eigenvectors();
  const Point radii(std::sqrt(rhs / eig.eigenvalues()(0)), std::sqrt(rhs / eig.eigenvalues()(1)));
  std::vector<Point> out;
  out.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_points);
    out.push_back(Point(center(0), center(1)) + axes * Point(radii(0) * std::cos(t), radii(1) * std::sin(t)));
  }
  return out;
}

/// Everything Stage A decides for one agent at one step.
struct ControlDecision {
  Vector u;
  Vector u_unconstrained;
  double delta_w_pred = 0.0;
  double delta_w_unconstrained = 0.0;
  bool in_convergence_range = false;
  bool range_nonempty = false;
  bool constraint_active = false;
  double local_w = 0.0;  // W^(k|k)
  LocalSelection selection;
  GainTerms gains;
};

/**
 * Stage A: select S^k around the previous mass center, build the gains at the
 * new mass center and pick the input (constrained QP when `box` is given).
 */
inline ControlDecision stage_a(const LtiSystem& sys, const Vector& x, const WeightVector& weights,
                               const std::vector<Point>& positions, const Point& prev_center, double alpha,
                               const InputConstraints* box) {
  if (sys.output_dim() != 2) throw InputError("stage_a: outputs must be planar");
  ControlDecision dec;
  dec.selection = select_local_samples(weights, positions, prev_center, alpha);
  const double mass = dec.selection.exhausted ? dec.selection.mass() : alpha;
  const Vector target = dec.selection.mass_center;
  dec.gains = gain_terms(sys, x, target, mass);
  dec.u_unconstrained = optimal_input_unconstrained(dec.gains);
  dec.delta_w_unconstrained = delta_w(dec.gains, dec.u_unconstrained);
  if (box) {
    dec.u = optimal_input_constrained(dec.gains, *box);
    dec.constraint_active = (dec.u - dec.u_unconstrained).norm() > 1e-9 * (1.0 + dec.u_unconstrained.norm());
  } else {
    dec.u = dec.u_unconstrained;
  }
  dec.delta_w_pred = delta_w(dec.gains, dec.u);
  const auto st = convergence_check(dec.gains, dec.u);
  dec.in_convergence_range = st.in_range;
  dec.range_nonempty = st.range_nonempty;
  const Vector y = sys.C() * x;
  dec.local_w = local_wasserstein(dec.selection, Point(y(0), y(1)));
  return dec;
}

}  // namespace dpc
