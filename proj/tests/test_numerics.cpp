#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dpc/numerics.hpp"
#include "oracles.hpp"

using dpc::Matrix;
using dpc::Vector;
namespace nm = dpc::numerics;

namespace {

double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, int rank) {
  std::normal_distribution<double> nd;
  Matrix l(rows, rank), r(rank, cols);
  for (int i = 0; i < l.size(); ++i) l.data()[i] = nd(rng);
  for (int i = 0; i < r.size(); ++i) r.data()[i] = nd(rng);
  return l * r;
}

}  // namespace

TEST(PseudoInverse, Identity) {
  EXPECT_TRUE(nm::pseudo_inverse(Matrix::Identity(2, 2)).isApprox(Matrix::Identity(2, 2)));
}

TEST(PseudoInverse, RankDeficientDiagonal) {
  Matrix d = Vector(Eigen::Vector2d(2.0, 0.0)).asDiagonal();
  Matrix expected = Vector(Eigen::Vector2d(0.5, 0.0)).asDiagonal();
  EXPECT_LT((nm::pseudo_inverse(d) - expected).norm(), 1e-15);
}

TEST(PseudoInverse, FullRowRankReproduces) {
  std::mt19937_64 rng(3);
  const Matrix m = random_matrix(rng, 2, 3, 2);
  const Matrix p = nm::pseudo_inverse(m);
  EXPECT_LT(rel_err(m * p * m, m), 1e-8);
}

TEST(PseudoInverse, PenroseIdentitiesOnRandomMatrices) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 8);
  for (int trial = 0; trial < 500; ++trial) {
    const int rows = dim(rng), cols = dim(rng);
    const int rank = std::uniform_int_distribution<int>(1, std::min(rows, cols))(rng);
    const Matrix m = random_matrix(rng, rows, cols, rank);
    const Matrix p = nm::pseudo_inverse(m);
    ASSERT_LT(rel_err(m * p * m, m), 1e-8);
    ASSERT_LT(rel_err(p * m * p, p), 1e-8);
    ASSERT_LT(rel_err((m * p).transpose(), m * p), 1e-8);
    ASSERT_LT(rel_err((p * m).transpose(), p * m), 1e-8);
  }
}

TEST(PseudoInverse, RejectsNonFinite) {
  Matrix m = Matrix::Identity(2, 2);
  m(0, 1) = std::nan("");
  EXPECT_THROW(nm::pseudo_inverse(m), dpc::InputError);
}

namespace {

nm::PsdQp box_qp(Matrix h, Vector g, double bound) {
  const auto m = h.rows();
  Matrix c(2 * m, m);
  c << -Matrix::Identity(m, m), Matrix::Identity(m, m);
  return {std::move(h), std::move(g), c, Vector::Constant(2 * m, bound)};
}

}  // namespace

TEST(PsdQp, IsotropicProjectionOntoBox) {
  const auto qp = box_qp(0.2 * Matrix::Identity(2, 2), -0.2 * Vector(Eigen::Vector2d(3, 4)), 2.0);
  const auto sol = nm::solve_psd_qp(qp);
  const Eigen::Vector2d grid = oracle::grid_argmin(
      [&](const Eigen::Vector2d& u) { return nm::qp_objective(qp, u); }, [](const Eigen::Vector2d&) { return true; },
      -2.0, 2.0, 1e-3);
  EXPECT_LT((sol.u - grid).norm(), 2e-3);
  EXPECT_NEAR(sol.u(0), 2.0, 1e-10);
  EXPECT_NEAR(sol.u(1), 2.0, 1e-10);
}

TEST(PsdQp, InteriorOptimum) {
  const auto qp = box_qp(Matrix::Identity(2, 2), Vector(Eigen::Vector2d(-1, 0)), 5.0);
  const auto sol = nm::solve_psd_qp(qp);
  EXPECT_NEAR(sol.u(0), 1.0, 1e-12);
  EXPECT_NEAR(sol.u(1), 0.0, 1e-12);
}

TEST(PsdQp, FlatDirectionGivesMinimumNorm) {
  Matrix h = Matrix::Zero(2, 2);
  h(0, 0) = 1.0;
  const auto qp = box_qp(h, Vector(Eigen::Vector2d(-1, 0)), 2.0);
  // The objective is flat in u2: every grid column at u1 = 1 attains the minimum.
  const double at_zero = nm::qp_objective(qp, Eigen::Vector2d(1.0, 0.0));
  for (double u2 = -2.0; u2 <= 2.0; u2 += 0.25) {
    EXPECT_DOUBLE_EQ(nm::qp_objective(qp, Eigen::Vector2d(1.0, u2)), at_zero);
  }
  const Eigen::Vector2d grid = oracle::grid_argmin(
      [&](const Eigen::Vector2d& u) { return nm::qp_objective(qp, u); }, [](const Eigen::Vector2d&) { return true; },
      -2.0, 2.0, 1e-2);
  EXPECT_NEAR(grid(0), 1.0, 1e-9);
  EXPECT_NEAR(grid(1), 0.0, 1e-9);

  const auto sol = nm::solve_psd_qp(qp);
  EXPECT_NEAR(sol.u(0), 1.0, 1e-10);
  EXPECT_NEAR(sol.u(1), 0.0, 1e-10);
}

TEST(PsdQp, FlatDirectionPushedToBoundaryByLinearTerm) {
  Matrix h = Matrix::Zero(2, 2);
  h(0, 0) = 1.0;
  const auto qp = box_qp(h, Vector(Eigen::Vector2d(-1, -0.5)), 2.0);
  const auto sol = nm::solve_psd_qp(qp);
  EXPECT_NEAR(sol.u(0), 1.0, 1e-10);
  EXPECT_NEAR(sol.u(1), 2.0, 1e-10);
}

TEST(PsdQp, MinimumNormOnShiftedBox) {
  // flat in u2, box u2 in [1, 3] -> smallest feasible |u2| is 1
  Matrix h = Matrix::Zero(2, 2);
  h(0, 0) = 2.0;
  Matrix c(4, 2);
  c << -1, 0, 0, -1, 1, 0, 0, 1;
  Vector d(4);
  d << 5, -1, 5, 3;
  const auto sol = nm::solve_psd_qp({h, Vector(Eigen::Vector2d(-2, 0)), c, d});
  EXPECT_NEAR(sol.u(0), 1.0, 1e-10);
  EXPECT_NEAR(sol.u(1), 1.0, 1e-10);
}

TEST(PsdQp, RejectsIndefiniteHessian) {
  Matrix h = Matrix::Identity(2, 2);
  h(1, 1) = -1.0;
  EXPECT_THROW(nm::solve_psd_qp(box_qp(h, Vector::Zero(2), 1.0)), dpc::InputError);
}

TEST(PsdQp, RejectsAsymmetricHessian) {
  Matrix h = Matrix::Identity(2, 2);
  h(0, 1) = 0.5;
  EXPECT_THROW(nm::solve_psd_qp(box_qp(h, Vector::Zero(2), 1.0)), dpc::InputError);
}

TEST(PsdQp, ReportsInfeasiblePolytope) {
  Matrix c(2, 1);
  c << 1, -1;
  Vector d(2);
  d << -1, -1;  // u <= -1 and u >= 1
  EXPECT_THROW(nm::solve_psd_qp({Matrix::Identity(1, 1), Vector::Zero(1), c, d}), dpc::InfeasibleError);
}

TEST(PsdQp, FeasiblePointAwayFromOrigin) {
  Matrix c(2, 2);
  c << -1, 0, 0, -1;
  Vector d(2);
  d << -3, -4;  // u1 >= 3, u2 >= 4
  const auto sol = nm::solve_psd_qp({Matrix::Identity(2, 2), Vector::Zero(2), c, d});
  EXPECT_NEAR(sol.u(0), 3.0, 1e-10);
  EXPECT_NEAR(sol.u(1), 4.0, 1e-10);
}

TEST(PsdQp, KktOnRandomInstances) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_int_distribution<int> ncons(0, 16);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = dim(rng);
    const int rank = std::uniform_int_distribution<int>(0, m)(rng);
    Matrix f = Matrix::Zero(m, m);
    for (int i = 0; i < rank * m; ++i) f.data()[i] = nd(rng);
    const Matrix h = f.transpose() * f;
    Vector g(m);
    for (int i = 0; i < m; ++i) g(i) = 3.0 * nd(rng);
    // random half-spaces around an interior point plus a bounding box
    const int extra = ncons(rng);
    Matrix c(2 * m + extra, m);
    Vector d(2 * m + extra);
    c.topRows(2 * m) << -Matrix::Identity(m, m), Matrix::Identity(m, m);
    d.head(2 * m).setConstant(2.0);
    Vector inner(m);
    for (int i = 0; i < m; ++i) inner(i) = 0.5 * nd(rng);
    for (int r = 0; r < extra; ++r) {
      Vector a(m);
      for (int i = 0; i < m; ++i) a(i) = nd(rng);
      c.row(2 * m + r) = a.transpose();
      d(2 * m + r) = a.dot(inner) + std::abs(nd(rng)) * 0.5;
    }
    nm::PsdQp qp{h, g, c, d};
    const auto sol = nm::solve_psd_qp(qp);
    const Vector slack = d - c * sol.u;
    ASSERT_GE(slack.minCoeff(), -1e-8) << "trial " << trial;
    ASSERT_GE(sol.lambda.minCoeff(), 0.0);
    const Vector station = 2.0 * h * sol.u + 2.0 * g + c.transpose() * sol.lambda;
    ASSERT_LE(station.norm(), 1e-6) << "trial " << trial;
    ASSERT_LE(std::abs(sol.lambda.dot(slack)), 1e-6) << "trial " << trial;
  }
}

TEST(TransportExact, SinglePair) {
  nm::TransportProblem tp{Vector::Ones(1), Vector::Ones(1), Matrix::Constant(1, 1, 25.0)};
  const auto sol = nm::solve_transport_exact(tp);
  EXPECT_DOUBLE_EQ(sol.plan(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(sol.cost, 25.0);
  EXPECT_DOUBLE_EQ(std::sqrt(sol.cost), 5.0);
}

TEST(TransportExact, IdenticalCloudsCostZero) {
  std::vector<dpc::Point> pts = {{0, 0}, {1, 2}, {3, -1}, {2, 2}};
  Vector w(4);
  w << 0.1, 0.2, 0.3, 0.4;
  const auto sol = nm::solve_transport_exact({w, w, nm::squared_distance_matrix(pts, pts)});
  EXPECT_NEAR(sol.cost, 0.0, 1e-15);
}

TEST(TransportExact, MonotoneMatchingOnALine) {
  std::vector<dpc::Point> a = {{0, 0}, {1, 0}};
  std::vector<dpc::Point> b = {{1, 0}, {2, 0}};
  const Matrix cost = nm::squared_distance_matrix(a, b);
  // plans [[t, .5-t], [.5-t, t]], t in [0, .5]
  double brute = std::numeric_limits<double>::infinity();
  for (int s = 0; s <= 1000; ++s) {
    const double t = 0.5 * s / 1000.0;
    brute = std::min(brute, t * cost(0, 0) + (0.5 - t) * cost(0, 1) + (0.5 - t) * cost(1, 0) + t * cost(1, 1));
  }
  const auto sol = nm::solve_transport_exact({Vector::Constant(2, 0.5), Vector::Constant(2, 0.5), cost});
  EXPECT_NEAR(sol.cost, brute, 1e-12);
  EXPECT_NEAR(sol.cost, 1.0, 1e-12);
}

TEST(TransportExact, RejectsUnbalancedMasses) {
  nm::TransportProblem tp{Vector::Constant(1, 1.0), Vector::Constant(1, 0.5), Matrix::Zero(1, 1)};
  EXPECT_THROW(nm::solve_transport_exact(tp), dpc::InputError);
}

TEST(TransportExact, RejectsNegativeMass) {
  Vector s(2);
  s << 1.5, -0.5;
  nm::TransportProblem tp{s, Vector::Ones(1), Matrix::Zero(2, 1)};
  EXPECT_THROW(nm::solve_transport_exact(tp), dpc::InputError);
}

TEST(TransportExact, SizeCapDirectsToSubsampling) {
  nm::TransportProblem tp{Vector::Constant(501, 1.0 / 501), Vector::Ones(1), Matrix::Zero(501, 1)};
  try {
    nm::solve_transport_exact(tp);
    FAIL() << "expected SizeError";
  } catch (const dpc::SizeError& e) {
    EXPECT_NE(std::string(e.what()).find("subsample"), std::string::npos);
  }
}

TEST(TransportExact, MatchesVertexEnumeration) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> coord(-5.0, 5.0);
  // Vertex enumeration is exponential; most trials are small, a few reach 5x5 and 6x4.
  for (int trial = 0; trial < 1000; ++trial) {
    int m, n;
    if (trial < 990) {
      do {
        m = std::uniform_int_distribution<int>(1, 6)(rng);
        n = std::uniform_int_distribution<int>(1, 6)(rng);
      } while (m + n > 8);
    } else {
      m = trial % 2 ? 5 : 6;
      n = trial % 2 ? 5 : 4;
    }
    auto [s, d] = oracle::rational_masses(rng, m, n);
    std::vector<std::vector<double>> cost(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(n)));
    Matrix cm(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        // small integer costs make ties and degenerate pivots common
        cm(i, j) = cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = std::round(coord(rng));
      }
    }
    const double expected = oracle::transport_by_vertex_enumeration(s, d, cost);
    const auto sol = nm::solve_transport_exact({Eigen::Map<Vector>(s.data(), m), Eigen::Map<Vector>(d.data(), n), cm});
    ASSERT_NEAR(sol.cost, expected, 1e-9) << "trial " << trial;
    for (int i = 0; i < m; ++i) ASSERT_NEAR(sol.plan.row(i).sum(), s[static_cast<std::size_t>(i)], 1e-9);
    for (int j = 0; j < n; ++j) ASSERT_NEAR(sol.plan.col(j).sum(), d[static_cast<std::size_t>(j)], 1e-9);
    ASSERT_GE(sol.plan.minCoeff(), 0.0);
  }
}

TEST(TransportExact, LargeProblemIsFeasibleAndBeatsGreedyStart) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coord(0.0, 100.0);
  std::vector<dpc::Point> a, b;
  for (int i = 0; i < 300; ++i) a.emplace_back(coord(rng), coord(rng));
  for (int i = 0; i < 250; ++i) b.emplace_back(coord(rng), coord(rng));
  const Matrix cost = nm::squared_distance_matrix(a, b);
  const auto sol = nm::solve_transport_exact({Vector::Constant(300, 1.0 / 300), Vector::Constant(250, 1.0 / 250), cost});
  EXPECT_LT((sol.plan.rowwise().sum() - Vector::Constant(300, 1.0 / 300)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((sol.plan.colwise().sum().transpose() - Vector::Constant(250, 1.0 / 250)).cwiseAbs().maxCoeff(), 1e-9);
  // dual certificate: reduced costs of the recovered potentials are nonnegative
  // (checked indirectly: no 2-cycle exchange improves the plan)
  for (int t = 0; t < 2000; ++t) {
    const int i1 = static_cast<int>(rng() % 300), i2 = static_cast<int>(rng() % 300);
    const int j1 = static_cast<int>(rng() % 250), j2 = static_cast<int>(rng() % 250);
    const double move = std::min(sol.plan(i1, j1), sol.plan(i2, j2));
    if (move <= 0) continue;
    const double delta = cost(i1, j2) + cost(i2, j1) - cost(i1, j1) - cost(i2, j2);
    ASSERT_GE(delta, -1e-9);
  }
}
