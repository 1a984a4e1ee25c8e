#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dpc/numerics/linalg.hpp"

namespace dpc::numerics {

/// minimize u'Hu + 2g'u  subject to  Cu u <= Du, with H symmetric PSD.
struct PsdQp {
  Matrix H;
  Vector g;
  Matrix Cu;  // c x m, may have zero rows
  Vector Du;
};

struct QpOptions {
  double tol = 1e-8;
  int max_iterations = 500;
  /// Phase-1 enumerates active sets; refuse beyond this many candidate subsets.
  std::size_t max_phase1_subsets = 200000;
};

struct QpSolution {
  Vector u;
  Vector lambda;  // one multiplier per row of Cu, for 2Hu + 2g + Cu'lambda = 0
  double objective = 0.0;
  int iterations = 0;
};

inline double qp_objective(const PsdQp& qp, const Vector& u) {
  return u.dot(qp.H * u) + 2.0 * qp.g.dot(u);
}

namespace detail {

inline void validate_qp(const PsdQp& qp) {
  const auto m = qp.H.rows();
  if (qp.H.cols() != m) throw InputError("qp: H must be square");
  if (qp.g.size() != m) throw InputError("qp: g length must match H");
  if (qp.Cu.rows() > 0 && qp.Cu.cols() != m) throw InputError("qp: Cu column count must match H");
  if (qp.Cu.rows() != qp.Du.size()) throw InputError("qp: Cu and Du row counts differ");
  require_finite(qp.H, "qp H");
  require_finite(qp.g, "qp g");
  require_finite(qp.Cu, "qp Cu");
  require_finite(qp.Du, "qp Du");
  if (m == 0) return;

  const double scale = std::max(1.0, qp.H.cwiseAbs().maxCoeff());
  if ((qp.H - qp.H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw InputError("qp: H is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (qp.H + qp.H.transpose()), Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo < -1e-10 * std::max(hi, 0.0) && lo < -1e-300) {
    throw InputError("qp: H is not positive semidefinite");
  }
}

inline double feas_slack(double d) { return 1e-12 * (1.0 + std::abs(d)); }

inline bool feasible(const Matrix& c, const Vector& d, const Vector& u, double extra = 0.0) {
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    if (c.row(i).dot(u) > d(i) + feas_slack(d(i)) + extra) return false;
  }
  return true;
}

// Advance a k-subset of {0..n-1} in lexicographic order.
inline bool next_combination(std::vector<Eigen::Index>& idx, Eigen::Index n) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  for (Eigen::Index i = k - 1; i >= 0; --i) {
    if (idx[i] < n - k + i) {
      ++idx[i];
      for (Eigen::Index j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

inline double binomial(Eigen::Index n, Eigen::Index k) {
  double r = 1.0;
  for (Eigen::Index i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

// The minimum-norm point of {u : Cu <= d} is the minimum-norm solution of some
// independent active subsystem of at most m rows, so enumerating those subsystems
// finds a feasible point exactly when one exists.
inline Vector find_feasible_point(const Matrix& c, const Vector& d, Eigen::Index m,
                                  const QpOptions& opt) {
  Vector zero = Vector::Zero(m);
  if (feasible(c, d, zero)) return zero;
  const Eigen::Index rows = c.rows();
  const Eigen::Index kmax = std::min(m, rows);

  double total = 0.0;
  for (Eigen::Index k = 1; k <= kmax; ++k) total += binomial(rows, k);
  if (total > static_cast<double>(opt.max_phase1_subsets)) {
    throw InputError("qp: too many constraints for phase-1 enumeration");
  }

  std::optional<Vector> best;
  for (Eigen::Index k = 1; k <= kmax; ++k) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
    do {
      Matrix cs(k, m);
      Vector ds(k);
      for (Eigen::Index i = 0; i < k; ++i) {
        cs.row(i) = c.row(idx[static_cast<std::size_t>(i)]);
        ds(i) = d(idx[static_cast<std::size_t>(i)]);
      }
      Vector u = pseudo_inverse(cs) * ds;
      if ((cs * u - ds).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + ds.cwiseAbs().maxCoeff())) continue;
      if (feasible(c, d, u, 1e-11) && (!best || u.squaredNorm() < best->squaredNorm())) best = u;
    } while (next_combination(idx, rows));
  }
  if (!best) throw InfeasibleError("qp: constraint polytope is empty");
  return *best;
}

struct ActiveSetResult {
  Vector u;
  Vector lambda;
  int iterations = 0;
};

inline bool independent_of(const Matrix& rows, const RowVector& r) {
  if (rows.rows() == 0) return r.norm() > 0.0;
  Matrix stacked(rows.rows() + 1, rows.cols());
  stacked << rows, r;
  return rank(stacked, 1e-9) > rank(rows, 1e-9);
}

// Primal active-set for a convex QP with permanent equality rows (ce u = de).
// u0 must be feasible. Flat directions in the reduced Hessian are resolved by
// the pseudoinverse (minimum-norm step); descent along a zero-curvature ray is
// followed to the first blocking constraint.
inline ActiveSetResult active_set(const Matrix& h, const Vector& g, const Matrix& c, const Vector& d,
                                  const Matrix& ce, Vector u, const QpOptions& opt) {
  const Eigen::Index m = h.rows();
  const Eigen::Index nc = c.rows();
  std::vector<Eigen::Index> working;

  auto working_rows = [&]() {
    Matrix w(ce.rows() + static_cast<Eigen::Index>(working.size()), m);
    if (ce.rows() > 0) w.topRows(ce.rows()) = ce;
    for (std::size_t i = 0; i < working.size(); ++i) {
      w.row(ce.rows() + static_cast<Eigen::Index>(i)) = c.row(working[i]);
    }
    return w;
  };

  for (Eigen::Index i = 0; i < nc; ++i) {
    if (std::abs(c.row(i).dot(u) - d(i)) <= 1e-10 * (1.0 + std::abs(d(i))) &&
        independent_of(working_rows(), c.row(i))) {
      working.push_back(i);
    }
  }

  const double hscale = std::max(1.0, h.cwiseAbs().maxCoeff());
  ActiveSetResult res;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    res.iterations = iter + 1;
    const Vector grad = h * u + g;
    const Matrix w = working_rows();
    const Matrix z = null_space(w, 1e-12);

    Vector p = Vector::Zero(m);
    bool ray = false;
    if (z.cols() > 0) {
      const Matrix hr = z.transpose() * h * z;
      const Vector gr = z.transpose() * grad;
      const Matrix hr_pinv = pseudo_inverse(0.5 * (hr + hr.transpose()), 1e-12);
      const Vector zstep = -hr_pinv * gr;
      const Vector resid = hr * zstep + gr;
      if (resid.norm() > 1e-10 * (1.0 + gr.norm()) * hscale) {
        p = -z * resid;  // descent with zero curvature
        ray = true;
      } else {
        p = z * zstep;
      }
    }

    if (!ray && p.norm() <= 1e-13 * (1.0 + u.norm())) {
      res.lambda = Vector::Zero(nc);
      if (w.rows() == 0) {
        res.u = u;
        return res;
      }
      const Vector mult = -pseudo_inverse(w.transpose()) * (2.0 * grad);
      Eigen::Index worst = -1;
      double worst_val = -opt.tol * 1e-3 * (1.0 + 2.0 * grad.norm());
      for (std::size_t i = 0; i < working.size(); ++i) {
        const double v = mult(ce.rows() + static_cast<Eigen::Index>(i));
        if (v < worst_val) {
          worst_val = v;
          worst = static_cast<Eigen::Index>(i);
        }
      }
      if (worst < 0) {
        for (std::size_t i = 0; i < working.size(); ++i) {
          res.lambda(working[i]) = std::max(0.0, mult(ce.rows() + static_cast<Eigen::Index>(i)));
        }
        res.u = u;
        return res;
      }
      working.erase(working.begin() + worst);
      continue;
    }

    double step = ray ? std::numeric_limits<double>::infinity() : 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i = 0; i < nc; ++i) {
      if (std::find(working.begin(), working.end(), i) != working.end()) continue;
      const double cp = c.row(i).dot(p);
      if (cp <= 1e-14 * (1.0 + p.norm())) continue;
      const double ratio = std::max(0.0, (d(i) - c.row(i).dot(u)) / cp);
      if (ratio < step) {
        step = ratio;
        blocking = i;
      }
    }
    if (!std::isfinite(step)) throw InputError("qp: objective unbounded below on the feasible set");
    u += step * p;
    if (blocking >= 0) working.push_back(blocking);
  }
  throw std::runtime_error("qp: active-set iteration limit reached");
}

}  // namespace detail

/**
 * Solves a convex QP with a PSD Hessian by a primal active-set method.
 *
 * When H is singular the optimum is a face; the returned point is the
 * minimum-norm optimizer. Multipliers satisfy 2Hu + 2g + Cu'lambda = 0.
 */
inline QpSolution solve_psd_qp(const PsdQp& qp, const QpOptions& opt = {}) {
  detail::validate_qp(qp);
  if (!(opt.tol > 0.0)) throw InputError("qp: tol must be positive");
  const Eigen::Index m = qp.H.rows();
  const Matrix h = 0.5 * (qp.H + qp.H.transpose());
  const Matrix c = qp.Cu.rows() > 0 ? qp.Cu : Matrix(0, m);

  Vector start = detail::find_feasible_point(c, qp.Du, m, opt);
  auto stage1 = detail::active_set(h, qp.g, c, qp.Du, Matrix(0, m), start, opt);

  QpSolution out;
  out.u = stage1.u;
  out.lambda = stage1.lambda;
  out.iterations = stage1.iterations;

  // Flat directions: minimize |u| over the optimal face {Hu = Hu*, g'u = g'u*}.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  const double top = std::max(0.0, eig.eigenvalues().maxCoeff());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (eig.eigenvalues()(i) > 1e-10 * top && eig.eigenvalues()(i) > 0.0) ++r;
  }
  if (r < m) {
    const Matrix range = eig.eigenvectors().rightCols(r);
    const Matrix nullsp = eig.eigenvectors().leftCols(m - r);
    const Vector g_null = nullsp * (nullsp.transpose() * qp.g);
    Matrix ce(r + 1, m);
    ce.topRows(r) = range.transpose();
    Eigen::Index rows = r;
    if (g_null.norm() > 1e-12 * (1.0 + qp.g.norm())) {
      ce.row(rows++) = g_null.normalized().transpose();
    }
    ce.conservativeResize(rows, m);
    if (rows < m) {
      auto stage2 = detail::active_set(Matrix::Identity(m, m), Vector::Zero(m), c, qp.Du, ce,
                                       out.u, opt);
      out.u = stage2.u;
      out.iterations += stage2.iterations;
    }
  }
  out.objective = qp_objective(qp, out.u);
  return out;
}

}  // namespace dpc::numerics
