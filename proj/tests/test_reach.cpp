#include "ztube/membership.hpp"
#include "ztube/reach.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace ztube;
using namespace ztube::testing;

namespace {

MatrixXd stack_ab(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd ab(a.rows(), a.cols() + b.cols());
  ab << a, b;
  return ab;
}

DataSet di_data(std::uint64_t seed, NoiseLaw law = NoiseLaw::uniform) {
  std::mt19937_64 rng(seed);
  PlantModel plant(di_A(), di_B(), di_noise());
  return collect_trajectory(plant, 100, (VectorXd(2) << -5, -2).finished(), {}, law, rng);
}

}  // namespace

TEST(CollectTrajectory, NoiseFreeDataSatisfyDynamics) {
  std::mt19937_64 rng(1);
  PlantModel plant(di_A(), di_B(), Zonotoped(VectorXd::Zero(2)));
  auto d = collect_trajectory(plant, 3, VectorXd::Ones(2), {}, NoiseLaw::uniform, rng);
  EXPECT_EQ(d.samples(), 3);
  EXPECT_LT((d.X_plus - di_A() * d.X_minus - di_B() * d.U_minus).lpNorm<Eigen::Infinity>(), 1e-14);
  // Consecutive columns chain.
  EXPECT_EQ(d.X_minus.col(1), d.X_plus.col(0));
}

TEST(CollectTrajectory, PresetDataHaveFullRank) {
  auto d = di_data(7);
  EXPECT_EQ(d.rank.rank, 3);
  EXPECT_TRUE(d.rank.full_row_rank());
  EXPECT_GT(d.rank.sigma_min, kRankTolerance * d.rank.sigma_max);
}

TEST(CollectTrajectory, ZeroInputIsNotExciting) {
  std::mt19937_64 rng(2);
  PlantModel plant(di_A(), di_B(), Zonotoped(VectorXd::Zero(2)));
  InputLaw zero{InputLaw::Kind::zero, 1.0};
  EXPECT_THROW(collect_trajectory(plant, 10, VectorXd::Zero(2), zero, NoiseLaw::none, rng), NotPersistentlyExciting);
  EXPECT_THROW(collect_trajectory(plant, 2, VectorXd::Zero(2), {}, NoiseLaw::none, rng), std::invalid_argument);
}

TEST(PlantModel, NoiseMustContainOrigin) {
  Zonotoped shifted((VectorXd(2) << 1, 0).finished(), 0.1 * MatrixXd::Identity(2, 2));
  EXPECT_THROW(PlantModel(di_A(), di_B(), shifted), std::invalid_argument);
  EXPECT_THROW(PlantModel(di_A(), MatrixXd::Ones(3, 1), di_noise()), DimensionError);
}

TEST(NoiseSampler, VertexLawHitsVertices) {
  std::mt19937_64 rng(3);
  NoiseSampler s(di_noise(), NoiseLaw::vertices);
  auto verts = zonotope_vertices(di_noise());
  for (int i = 0; i < 100; ++i) {
    VectorXd w = s(rng);
    bool hit = false;
    for (const auto& v : verts) hit = hit || (v - w).norm() < 1e-15;
    EXPECT_TRUE(hit);
  }
  NoiseSampler big(random_zonotope(5, 20, rng), NoiseLaw::vertices);
  EXPECT_EQ(big(rng).size(), 5);
}

TEST(PseudoInverse, PenroseConditions) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    MatrixXd p = random_matrix(3, 12, rng);
    MatrixXd q = right_pseudo_inverse(p);
    EXPECT_LT((p * q - MatrixXd::Identity(3, 3)).norm(), 1e-12);
    EXPECT_LT((q * p * q - q).norm(), 1e-12);
    EXPECT_LT((q * p - (q * p).transpose()).norm(), 1e-12);
  }
  // Rank-deficient: still a generalized inverse.
  MatrixXd r = random_matrix(3, 1, rng) * random_matrix(1, 6, rng);
  MatrixXd q = right_pseudo_inverse(r);
  EXPECT_LT((r * q * r - r).norm(), 1e-10);
}

TEST(ConsistentSet, ExactIdentificationWithoutNoise) {
  std::mt19937_64 rng(5);
  PlantModel plant(di_A(), di_B(), Zonotoped(VectorXd::Zero(2)));
  auto d = collect_trajectory(plant, 3, VectorXd::Ones(2), {}, NoiseLaw::none, rng);
  auto md = build_consistent_set(d, plant.noise);
  EXPECT_EQ(md.num_generators(), 0);
  EXPECT_LT((md.center() - stack_ab(di_A(), di_B())).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(ConsistentSet, PresetPlantIsMember) {
  auto d = di_data(11);
  auto full = build_consistent_set(d, di_noise(), false);
  EXPECT_EQ(full.num_generators(), 200);
  EXPECT_EQ(full.rows(), 2);
  EXPECT_EQ(full.cols(), 3);
  EXPECT_TRUE(mz_contains(full, stack_ab(di_A(), di_B())));
  auto reduced = build_consistent_set(d, di_noise());
  EXPECT_LE(reduced.num_generators(), 6);
  EXPECT_TRUE(mz_contains(reduced, stack_ab(di_A(), di_B())));

  auto adversarial = build_consistent_set(di_data(12, NoiseLaw::vertices), di_noise(), false);
  EXPECT_TRUE(mz_contains(adversarial, stack_ab(di_A(), di_B())));
}

TEST(ConsistentSet, RandomPlantsAreMembers) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> nd(1, 3), md(1, 2), gd(1, 3);
  for (int rep = 0; rep < 50; ++rep) {
    const Index n = nd(rng), m = md(rng);
    MatrixXd g = random_matrix(n, gd(rng), rng, 0.2);
    VectorXd c = g * random_vector(g.cols(), rng, 0.5);
    PlantModel plant(random_matrix(n, n, rng, 0.6), random_matrix(n, m, rng), Zonotoped(c, g));
    auto d = collect_trajectory(plant, 5 * (n + m), random_vector(n, rng), {}, NoiseLaw::uniform, rng);
    ASSERT_TRUE(mz_contains(build_consistent_set(d, plant.noise, false), stack_ab(plant.A0, plant.B0)))
        << "plant " << rep;
    ASSERT_TRUE(mz_contains(build_consistent_set(d, plant.noise), stack_ab(plant.A0, plant.B0)));
  }
}

TEST(ConsistentSet, ShrinksWithNoise) {
  auto d = di_data(13);
  auto big = build_consistent_set(d, di_noise(), false);
  auto small = build_consistent_set(d, enlarge(di_noise(), 0.5), false);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) ASSERT_TRUE(mz_contains(big, sample_member(small, rng)));
}

TEST(ConsistentSet, RejectsRankDeficientData) {
  auto d = make_dataset(MatrixXd::Zero(2, 5), MatrixXd::Zero(2, 5), MatrixXd::Zero(1, 5));
  EXPECT_FALSE(d.rank.full_row_rank());
  EXPECT_THROW(build_consistent_set(d, di_noise()), NotPersistentlyExciting);
  EXPECT_THROW(make_dataset(MatrixXd::Zero(2, 5), MatrixXd::Zero(2, 4), MatrixXd::Zero(1, 5)), DimensionError);
}

TEST(VertexBound, SmallCases) {
  EXPECT_EQ(minmax_vertex_bound(1, 1, 3, 1, 2), 10);
  EXPECT_EQ(minmax_vertex_bound(2, 1, 3, 1, 1), 10);
  EXPECT_EQ(binomial(5, 7), 0);
  EXPECT_EQ(binomial(0, 0), 1);
  EXPECT_EQ(binomial(50, 25), BigInt("126410606437752"));
  EXPECT_THROW(minmax_vertex_bound(0, 1, 3, 1, 1), std::invalid_argument);
}

TEST(VertexBound, FrozenOracleValues) {
  // From tests/oracles/vertex_bound.py (exact integer arithmetic).
  const char* expected[] = {"5073927284", "5073927296", "5073927344", "5073927536", "5073928304", "5073931376"};
  for (int N = 1; N <= 6; ++N) EXPECT_EQ(minmax_vertex_bound(2, 1, 100, 2, N), BigInt(expected[N - 1])) << N;
  EXPECT_EQ(minmax_vertex_bound(3, 2, 1000, 4, 10), BigInt("6019704320823896537080191270328314585242"));
}
