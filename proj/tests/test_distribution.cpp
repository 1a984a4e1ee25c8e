#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "dpc/distribution.hpp"

namespace {

dpc::MixtureSpec single_gaussian(double var, std::size_t n, std::uint64_t seed) {
  dpc::MixtureSpec spec;
  spec.components.push_back({dpc::Point(50, 50), var * Eigen::Matrix2d::Identity(), 1.0});
  spec.n_samples = n;
  spec.seed = seed;
  return spec;
}

dpc::MixtureSpec stand_in_mixture(std::size_t n, std::uint64_t seed) {
  dpc::MixtureSpec spec;
  Eigen::Matrix2d cov;
  cov << 60, 15, 15, 40;
  spec.components = {{dpc::Point(30, 70), cov, 0.3},
                     {dpc::Point(70, 65), 50 * Eigen::Matrix2d::Identity(), 0.25},
                     {dpc::Point(65, 25), 80 * Eigen::Matrix2d::Identity(), 0.25},
                     {dpc::Point(20, 20), 30 * Eigen::Matrix2d::Identity(), 0.2}};
  spec.n_samples = n;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST(SampleMixture, Deterministic) {
  const auto a = dpc::sample_mixture(stand_in_mixture(2000, 42));
  const auto b = dpc::sample_mixture(stand_in_mixture(2000, 42));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.positions[i], b.positions[i]);
  const auto c = dpc::sample_mixture(stand_in_mixture(2000, 43));
  EXPECT_NE(a.positions[0], c.positions[0]);
}

TEST(SampleMixture, TinyCovarianceCollapsesOntoMean) {
  const auto cloud = dpc::sample_mixture(single_gaussian(1e-12, 100, 1));
  for (const auto& p : cloud.positions) EXPECT_LT((p - dpc::Point(50, 50)).norm(), 1e-4);
}

TEST(SampleMixture, DefaultScenarioCloud) {
  const auto cloud = dpc::sample_mixture(stand_in_mixture(5975, 7));
  ASSERT_EQ(cloud.size(), 5975u);
  double total = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    EXPECT_TRUE(dpc::Domain{}.contains(cloud.positions[i]));
    total += cloud.weights[i];
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(SampleMixture, RejectionKeepsPointsInsideDomain) {
  auto spec = single_gaussian(400, 3000, 5);
  spec.components[0].mean = dpc::Point(2, 2);  // most mass falls outside
  const auto cloud = dpc::sample_mixture(spec);
  EXPECT_EQ(cloud.size(), 3000u);
  for (const auto& p : cloud.positions) ASSERT_TRUE(spec.domain.contains(p));
}

TEST(SampleMixture, RejectsBadSpecs) {
  EXPECT_THROW(dpc::sample_mixture(single_gaussian(0.0, 10, 1)), dpc::InputError);
  auto skew = single_gaussian(1.0, 10, 1);
  skew.components[0].covariance << 1, 2, 2, 1;  // indefinite
  EXPECT_THROW(dpc::sample_mixture(skew), dpc::InputError);
  auto heavy = single_gaussian(1.0, 10, 1);
  heavy.components[0].weight = 0.7;
  EXPECT_THROW(dpc::sample_mixture(heavy), dpc::InputError);
  EXPECT_THROW(dpc::sample_mixture(single_gaussian(1.0, 0, 1)), dpc::InputError);
}

TEST(SampleMixture, EmpiricalMeanWithinFiveSigma) {
  const std::size_t n = 20000;
  const double sigma = 3.0;
  const auto cloud = dpc::sample_mixture(single_gaussian(sigma * sigma, n, 99));
  dpc::Point mean = dpc::Point::Zero();
  for (const auto& p : cloud.positions) mean += p;
  mean /= static_cast<double>(n);
  const double bound = 5.0 * sigma / std::sqrt(static_cast<double>(n));
  EXPECT_LT(std::abs(mean.x() - 50.0), bound);
  EXPECT_LT(std::abs(mean.y() - 50.0), bound);
}

TEST(LoadPoints, UniformWeightsWithoutColumn) {
  std::istringstream in("x,y\n0,0\n1,0\n0,1\n");
  const auto cloud = dpc::load_points(in);
  ASSERT_EQ(cloud.size(), 3u);
  for (double w : cloud.weights) EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
}

TEST(LoadPoints, NormalizesWeights) {
  std::istringstream in("0,0,2\n1,0,2\n0,1,4\n");
  const auto cloud = dpc::load_points(in);
  EXPECT_DOUBLE_EQ(cloud.weights[0], 0.25);
  EXPECT_DOUBLE_EQ(cloud.weights[1], 0.25);
  EXPECT_DOUBLE_EQ(cloud.weights[2], 0.5);
}

TEST(LoadPoints, RejectsInvalidRows) {
  for (const char* text : {"0,0,-1\n", "", "x,y\n", "0,0\n1,nan\n", "0,0,1\n1,1\n", "1,2,3,4\n", "0,inf\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(dpc::load_points(in), dpc::InputError) << text;
  }
}

TEST(LoadPoints, MissingFile) { EXPECT_THROW(dpc::load_points("/nonexistent/points.csv"), dpc::InputError); }

TEST(AgentAlpha, Budgets) {
  EXPECT_DOUBLE_EQ(dpc::agent_alpha({1500, 1500, 1500}), 1.0 / 4500);
  EXPECT_DOUBLE_EQ(dpc::agent_alpha({10}), 0.1);
  EXPECT_DOUBLE_EQ(dpc::agent_alpha({3000, 3000, 3000}), 1.0 / 9000);
  EXPECT_THROW(dpc::agent_alpha({}), dpc::InputError);
  EXPECT_THROW(dpc::agent_alpha({5, 0}), dpc::InputError);
}

TEST(Weights, SnapFloor) {
  EXPECT_EQ(dpc::snap_weight(5e-13), 0.0);
  EXPECT_EQ(dpc::snap_weight(2e-12), 2e-12);
}

TEST(Weights, ReplicatedPerAgent) {
  const auto cloud = dpc::sample_mixture(stand_in_mixture(100, 1));
  auto w = dpc::replicate_weights(cloud, 3);
  ASSERT_EQ(w.size(), 3u);
  w[0][0] = 0.0;
  EXPECT_EQ(w[1][0], cloud.weights[0]);
}
