#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "checks.hpp"
#include "fmc/cluster.hpp"
#include "fmc/error.hpp"
#include "fmc/hungarian.hpp"
#include "fmc/reference.hpp"
#include "oracles.hpp"

using namespace fmc;

namespace {

Vector basis(int dim, int k) {
  Vector v = Vector::Zero(dim);
  v[k] = 1.0;
  return v;
}

std::vector<Vector> tight_groups(int groups, int per, int dim, double angle, oracle::Rng& rng) {
  std::vector<Vector> out;
  for (int g = 0; g < groups; ++g)
    for (int i = 0; i < per; ++i) out.push_back(oracle::rotate_away(basis(dim, g), angle, rng));
  return out;
}

}  // namespace

TEST(Seeds, IdenticalPointsGiveOneSeed) {
  VMFConfig cfg;
  cfg.n_seeds = 5;
  const std::vector<Vector> pts(8, basis(3, 1));
  EXPECT_EQ(select_seeds(pts, cfg).size(), 1u);
}

TEST(Seeds, SingleSeedIsTheRandomDraw) {
  oracle::Rng rng(1);
  const auto pts = tight_groups(2, 10, 4, 0.1, rng);
  VMFConfig cfg;
  cfg.n_seeds = 1;
  cfg.rng_seed = 77;
  std::mt19937_64 draw(77);
  EXPECT_EQ(select_seeds(pts, cfg), std::vector<int>{static_cast<int>(draw() % pts.size())});
}

TEST(Seeds, OnePerOrthogonalGroup) {
  oracle::Rng rng(2);
  const auto pts = tight_groups(3, 20, 5, 0.05, rng);
  VMFConfig cfg;
  cfg.n_seeds = 3;
  std::set<int> groups;
  for (int s : select_seeds(pts, cfg)) groups.insert(s / 20);
  EXPECT_EQ(groups.size(), 3u);
}

TEST(MeanShift, FixedPoint) {
  const std::vector<Vector> pts(5, basis(3, 2));
  VMFConfig cfg;
  cfg.max_iter = 1;
  EXPECT_NEAR((vmf_mean_shift(pts, basis(3, 0) + 0.3 * basis(3, 2), cfg) - basis(3, 2)).norm(), 0.0, 1e-15);
}

TEST(MeanShift, StaysInItsCluster) {
  oracle::Rng rng(3);
  const auto pts = tight_groups(3, 100, 6, 0.2, rng);
  const VMFConfig cfg;
  for (int g = 0; g < 3; ++g) {
    const std::vector<Vector> members(pts.begin() + 100 * g, pts.begin() + 100 * (g + 1));
    const Vector mode = vmf_mean_shift(pts, pts[100 * g + 5], cfg);
    EXPECT_LT(distance_to_degrees(cosine_distance(mode, spherical_mean(members))), 2.0);
  }
}

TEST(MeanShift, AntipodalPointsBreakTowardsTheNearerOne) {
  const std::vector<Vector> pts{basis(2, 0), -basis(2, 0)};
  const Vector seed = (basis(2, 0) * 0.2 + basis(2, 1)).normalized();
  const Vector mode = vmf_mean_shift(pts, seed, VMFConfig{});
  EXPECT_NEAR(mode[0], 1.0, 1e-9);
}

TEST(MeanShift, DensityAscends) {
  oracle::Rng rng(4);
  const auto planted = oracle::planted_clusters(3, 60, 6, 16.0, rng);
  const VMFConfig cfg;
  for (int s : select_seeds(planted.points, cfg)) {
    const Vector mode = vmf_mean_shift(planted.points, planted.points[s], cfg);
    EXPECT_GE(vmf_density(planted.points, mode, cfg.kappa),
              vmf_density(planted.points, planted.points[s], cfg.kappa));
  }
}

TEST(Cluster, OneTightCluster) {
  oracle::Rng rng(5);
  const auto pts = tight_groups(1, 50, 4, 0.05, rng);
  const ClusterResult r = cluster_embeddings(pts, VMFConfig{});
  EXPECT_EQ(r.k(), 1);
  for (int a : r.assignments) EXPECT_EQ(a, 0);
}

TEST(Cluster, ThreePlanted) {
  oracle::Rng rng(6);
  const auto planted = oracle::planted_clusters(3, 200, 8, 16.0, rng);
  const ClusterResult r = cluster_embeddings(planted.points, VMFConfig{});
  EXPECT_EQ(r.k(), 3);
  EXPECT_GE(oracle::purity(planted.labels, r.assignments), 0.99);
}

TEST(Cluster, MergeNearbyModes) {
  const Vector a = basis(3, 0);
  oracle::Rng rng(7);
  const Vector b = oracle::rotate_away(a, std::acos(1.0 - 2.0 * 0.001), rng);
  EXPECT_NEAR(cosine_distance(a, b), 0.001, 1e-12);
  const auto merged = merge_modes({a, b}, 0.05);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_NEAR((merged[0] - spherical_mean({a, b})).norm(), 0.0, 1e-15);
  EXPECT_EQ(merge_modes({a, basis(3, 1)}, 0.05).size(), 2u);
}

TEST(Cluster, MergeChainsTransitively) {
  // Three modes 0.03 apart in a row: the ends are 0.05+ apart but the chain
  // connects them.
  Vector a = basis(2, 0);
  const double step = std::acos(1.0 - 2.0 * 0.03);
  Vector b(2), c(2);
  b << std::cos(step), std::sin(step);
  c << std::cos(2 * step), std::sin(2 * step);
  EXPECT_EQ(merge_modes({a, b, c}, 0.05).size(), 1u);
}

TEST(Cluster, Deterministic) {
  oracle::Rng rng(8);
  const auto planted = oracle::planted_clusters(4, 50, 8, 16.0, rng);
  VMFConfig cfg;
  cfg.rng_seed = 3;
  const ClusterResult a = cluster_embeddings(planted.points, cfg);
  const ClusterResult b = cluster_embeddings(planted.points, cfg);
  EXPECT_EQ(a.assignments, b.assignments);
  ASSERT_EQ(a.k(), b.k());
  for (int k = 0; k < a.k(); ++k) EXPECT_EQ(a.means[k], b.means[k]);
}

TEST(Cluster, MergeIdempotent) {
  oracle::Rng rng(9);
  const auto planted = oracle::planted_clusters(3, 80, 6, 16.0, rng);
  const ClusterResult r = cluster_embeddings(planted.points, VMFConfig{});
  EXPECT_EQ(merge_modes(r.means, VMFConfig{}.merge_dist).size(), r.means.size());
}

TEST(Cluster, AssignedToNearestMean) {
  oracle::Rng rng(10);
  const auto planted = oracle::planted_clusters(3, 80, 6, 30.0, rng);
  const ClusterResult r = cluster_embeddings(planted.points, VMFConfig{});
  for (std::size_t i = 0; i < planted.points.size(); ++i) {
    const int a = r.assignments[i];
    for (int k = 0; k < r.k(); ++k) {
      const double dk = cosine_distance_unchecked(r.means[k], planted.points[i]);
      const double da = cosine_distance_unchecked(r.means[a], planted.points[i]);
      EXPECT_TRUE(da < dk || (da == dk && a <= k));
    }
  }
}

TEST(Cluster, NearestMeanTiesGoLow) {
  const std::vector<Vector> means{basis(2, 0), basis(2, 1)};
  EXPECT_EQ(nearest_mean(means, Vector::Constant(2, std::sqrt(0.5))), 0);
}

TEST(Cluster, SuiteSmall) {
  const checks::Report rep = checks::clustering(12, 11);
  EXPECT_TRUE(rep.passed) << rep.lines.back();
}

TEST(Cluster, MatchesSerialReference) {
  oracle::Rng rng(12);
  const auto planted = oracle::planted_clusters(3, 100, 8, 20.0, rng);
  VMFConfig cfg;
  cfg.tol = 1e-14;
  cfg.max_iter = 5000;
  std::vector<Vector> seeds;
  for (int s : select_seeds(planted.points, cfg)) seeds.push_back(planted.points[s]);
  const auto serial = reference::mean_shift_modes(planted.points, seeds, cfg.kappa, cfg.tol, cfg.max_iter);
  const ClusterResult r = cluster_embeddings(planted.points, cfg);
  const auto merged = merge_modes(serial, cfg.merge_dist);
  ASSERT_EQ(merged.size(), r.means.size());
  for (std::size_t k = 0; k < merged.size(); ++k) EXPECT_LT((merged[k] - r.means[k]).norm(), 1e-9);
}

TEST(VMFConfig, Validation) {
  VMFConfig cfg;
  cfg.kappa = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = VMFConfig{};
  cfg.merge_dist = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Hungarian, Identity) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Ones(4, 4) - Eigen::MatrixXd::Identity(4, 4);
  const Assignment a = hungarian(c);
  EXPECT_EQ(a.row_to_col, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(a.cost, 0.0);
}

TEST(Hungarian, AntiDiagonal) {
  Eigen::MatrixXd c(2, 2);
  c << 1, 0, 0, 1;
  const Assignment a = hungarian(c);
  EXPECT_EQ(a.row_to_col, (std::vector<int>{1, 0}));
  EXPECT_EQ(a.cost, 0.0);
}

TEST(Hungarian, Random5x5AgainstPermutations) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd c(5, 5);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = u(rng);
    EXPECT_NEAR(hungarian(c).cost, oracle::brute_force_assignment_cost(c), 1e-12);
  }
}

TEST(Hungarian, Rectangular) {
  Eigen::MatrixXd tall(3, 2);
  tall << 5, 1, 2, 9, 0, 0;
  const Assignment a = hungarian(tall);
  EXPECT_EQ(a.cost, 1.0);
  EXPECT_EQ(std::count(a.row_to_col.begin(), a.row_to_col.end(), -1), 1);
  EXPECT_EQ(hungarian(Eigen::MatrixXd(tall.transpose())).cost, 1.0);
}

TEST(Hungarian, RejectsNonFinite) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 2);
  c(0, 1) = INFINITY;
  EXPECT_THROW(hungarian(c), std::invalid_argument);
}

TEST(MatchWindows, IdenticalMeansKeepIds) {
  const std::vector<Vector> prev{basis(3, 0), basis(3, 1)};
  int next = 10;
  EXPECT_EQ(match_windows(prev, {4, 7}, prev, 0.2, next), (std::vector<int>{4, 7}));
  EXPECT_EQ(next, 10);
}

TEST(MatchWindows, PermutationRecovered) {
  const std::vector<Vector> prev{basis(4, 0), basis(4, 1), basis(4, 2)};
  std::vector<int> order{0, 1, 2};
  do {
    std::vector<Vector> cur;
    for (int i : order) cur.push_back(prev[i]);
    int next = 9;
    const auto ids = match_windows(prev, {1, 2, 3}, cur, 0.2, next);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(ids[i], order[i] + 1);
  } while (std::next_permutation(order.begin(), order.end()));
}

TEST(MatchWindows, FarMeanGetsNewId) {
  const std::vector<Vector> prev{basis(3, 0)};
  Vector far = basis(3, 0) * std::cos(1.0) + basis(3, 1) * std::sin(1.0);  // d = 0.23
  int next = 2;
  EXPECT_EQ(match_windows(prev, {1}, {far}, 0.2, next), std::vector<int>{2});
  EXPECT_EQ(next, 3);
  Vector exact = basis(3, 0) * 0.6 + basis(3, 1) * 0.8;  // d = 0.2, at the gate
  EXPECT_EQ(match_windows(prev, {1}, {exact}, 0.2, next), std::vector<int>{3});
}

TEST(MatchWindows, FirstWindowNumbersFromNextId) {
  int next = 1;
  EXPECT_EQ(match_windows({}, {}, {basis(2, 0), basis(2, 1)}, 0.2, next), (std::vector<int>{1, 2}));
}

TEST(Cluster, SeedChoiceVariance) {
  oracle::Rng rng(14);
  const auto planted = oracle::planted_clusters(3, 150, 8, 16.0, rng);
  std::set<int> ks;
  double worst = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    VMFConfig cfg;
    cfg.rng_seed = seed;
    const ClusterResult r = cluster_embeddings(planted.points, cfg);
    ks.insert(r.k());
    worst = std::min(worst, oracle::purity(planted.labels, r.assignments));
  }
  RecordProperty("distinct_k", static_cast<int>(ks.size()));
  EXPECT_EQ(ks, std::set<int>{3});
  EXPECT_GE(worst, 0.99);
}
