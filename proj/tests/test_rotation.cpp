#include <gtest/gtest.h>

#include <cmath>

#include "hot/rotation.hpp"
#include "hot/synth.hpp"
#include "test_support.hpp"

using hot::Index;

namespace {

// Product of n random Householder reflections; independent of the library's QR path.
Eigen::MatrixXd householder_orthogonal(hot::Rng& rng, Index n) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(n, n);
  for (Index k = 0; k < n; ++k) {
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = rng.normal();
    v.normalize();
    q = q * (Eigen::MatrixXd::Identity(n, n) - 2.0 * v * v.transpose());
  }
  return q;
}

hot::IndexSet iota_rows(Index n) {
  hot::IndexSet rows;
  for (Index i = 0; i < n; ++i) rows.push_back(i);
  return rows;
}

hot::SynthPair rotated_pair(std::size_t depth, Index width, Index stimuli, std::uint64_t seed, double noise = 0.0) {
  hot::SynthSpec spec;
  spec.kind = hot::SynthKind::rotated;
  spec.src_depth = depth;
  spec.widths = {width};
  spec.stimuli = stimuli;
  spec.noise_sigma = noise;
  spec.seed = seed;
  return hot::generate(spec);
}

struct Standardized {
  hot::NetworkActivations src, tgt;
  hot::SplitSpec split;
};

Standardized standardized(const hot::NetworkActivations& a, const hot::NetworkActivations& b, std::uint64_t seed = 3) {
  auto split = hot::make_split(a.stimuli(), 0.2, seed);
  return {hot::standardize(a, split), hot::standardize(b, split), split};
}

double orthogonality_error(const Eigen::MatrixXd& r) {
  return (r.transpose() * r - Eigen::MatrixXd::Identity(r.cols(), r.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Procrustes, IdenticalInputsGiveIdentity) {
  hot::Rng rng(1);
  const Eigen::MatrixXd x = hot_test::gaussian(rng, 40, 6);
  const auto r = hot::procrustes(x, x);
  EXPECT_LE((r.rotation - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_FALSE(r.rank_deficient);
}

TEST(Procrustes, RecoversPlantedRotation) {
  hot::Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.below(10));
    const Eigen::MatrixXd x = hot_test::gaussian(rng, 60, n);
    const Eigen::MatrixXd r0 = householder_orthogonal(rng, n);
    const auto r = hot::procrustes(x, x * r0);
    EXPECT_LE((r.rotation - r0).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE(orthogonality_error(r.rotation), 1e-10);
  }
}

TEST(Procrustes, NoRandomOrthogonalProbeDoesBetter) {
  hot::Rng rng(3);
  const Eigen::MatrixXd x = hot_test::gaussian(rng, 30, 5);
  const Eigen::MatrixXd t = hot_test::gaussian(rng, 30, 5) + x * householder_orthogonal(rng, 5);
  const auto r = hot::procrustes(x, t);
  const double best = (x * r.rotation - t).squaredNorm();
  for (int probe = 0; probe < 100; ++probe) {
    EXPECT_GE((x * householder_orthogonal(rng, 5) - t).squaredNorm(), best - 1e-9);
  }
}

TEST(Procrustes, FlagsRankDeficiencyAndShapeErrors) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(10, 3);
  x.col(0).setLinSpaced(10, -1.0, 1.0);
  const auto r = hot::procrustes(x, x);
  EXPECT_TRUE(r.rank_deficient);
  EXPECT_LE(orthogonality_error(r.rotation), 1e-10);
  EXPECT_THROW(hot::procrustes(x, Eigen::MatrixXd::Zero(10, 2)), hot::Error);
}

TEST(AlternateMinimize, SelfPairConvergesImmediately) {
  hot::Rng rng(4);
  const hot::ActivationMatrix a(hot_test::gaussian(rng, 80, 7), "a");
  const auto p = hot::alternate_minimize(a, a, iota_rows(80), {}, {});
  EXPECT_LE(p.alternations, 2u);
  EXPECT_LE(p.cost, 1e-8);
  EXPECT_TRUE(p.converged);
  EXPECT_LE((p.rotation - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(AlternateMinimize, RotatedCopyIsRecoveredOnHeldOutRows) {
  const auto pair = rotated_pair(1, 8, 400, 5);
  const auto s = standardized(pair.src, pair.tgt);
  const auto fit = hot::alternate_minimize(s.src.layer(0), s.tgt.layer(0), s.split.train_idx, {}, {});
  const Eigen::MatrixXd x = hot::select_rows(s.src.layer(0).values(), s.split.val_idx);
  const Eigen::MatrixXd y = hot::select_rows(s.tgt.layer(0).values(), s.split.val_idx);
  const Eigen::MatrixXd pred = y * hot::row_normalized(fit.plan).transpose() * fit.rotation.transpose();
  for (Index i = 0; i < x.cols(); ++i) EXPECT_GE(hot::pearson(pred.col(i), x.col(i)).value, 0.99);
}

TEST(AlternateMinimize, StoredCostMatchesRecomputation) {
  hot::Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const hot::ActivationMatrix a(hot_test::gaussian(rng, 50, 5), "a");
    const hot::ActivationMatrix b(hot_test::gaussian(rng, 50, 4), "b");
    const auto rows = iota_rows(50);
    const auto p = hot::alternate_minimize(a, b, rows, {}, {});
    EXPECT_NEAR(hot::rotation_cost(a.values(), b.values(), p.plan, p.rotation), p.cost, 1e-12);
    EXPECT_LE(orthogonality_error(p.rotation), 1e-10);
    EXPECT_NEAR(std::abs(p.rotation.determinant()), 1.0, 1e-10);
  }
}

TEST(AlternateMinimize, TracesAreMonotoneOrStopAtTheViolation) {
  hot::Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const hot::ActivationMatrix a(hot_test::gaussian(rng, 40, 4), "a");
    const hot::ActivationMatrix b(hot_test::gaussian(rng, 40, 6), "b");
    const auto p = hot::alternate_minimize(a, b, iota_rows(40), {}, {});
    ASSERT_EQ(p.trace.size(), p.alternations);
    for (std::size_t k = 1; k < p.trace.size(); ++k) {
      const bool rose = p.trace[k] > p.trace[k - 1] + 1e-7;
      if (rose) {
        EXPECT_FALSE(p.monotone);
        EXPECT_EQ(k + 1, p.trace.size());
      }
    }
    EXPECT_EQ(p.cost, *std::min_element(p.trace.begin(), p.trace.end()));
  }
}

TEST(AlternateMinimize, RespectsMaxOuterAndRejectsTinyRowSets) {
  hot::Rng rng(8);
  const hot::ActivationMatrix a(hot_test::gaussian(rng, 40, 4), "a");
  const hot::ActivationMatrix b(hot_test::gaussian(rng, 40, 4), "b");
  hot::RotationOptions options;
  options.max_outer = 1;
  const auto p = hot::alternate_minimize(a, b, iota_rows(40), options, {});
  EXPECT_EQ(p.alternations, 1u);
  EXPECT_THROW(hot::alternate_minimize(a, b, {0}, {}, {}), hot::Error);
}

TEST(RunHotR, RotatedNetworkScoresHighAndBeatsVanilla) {
  const auto pair = rotated_pair(3, 10, 500, 9);
  const auto s = standardized(pair.src, pair.tgt);
  const auto r = hot::run_hot_r(s.src, s.tgt, s.split);
  const auto plain = hot::run_hot(s.src, s.tgt, s.split);
  EXPECT_GE(r.base.hot_score, 0.95);
  EXPECT_GT(r.base.hot_score, plain.hot_score);
  for (const auto& rot : r.rotations.rotations) {
    EXPECT_LE(orthogonality_error(rot), 1e-10);
    EXPECT_NEAR(std::abs(rot.determinant()), 1.0, 1e-10);
  }
}

// Raw generator output: per-column standardization would rescale the rotated
// columns and leave a small irreducible residual.
TEST(RunHotR, VanillaCostStaysHighOnRotatedData) {
  const auto pair = rotated_pair(2, 10, 400, 10);
  const auto split = hot::make_split(400, 0.2, 1);
  const auto plain = hot::run_hot(pair.src, pair.tgt, split);
  const auto r = hot::run_hot_r(pair.src, pair.tgt, split);
  for (Index l = 0; l < 2; ++l) {
    EXPECT_GT(plain.layer_costs.values(l, l), 1e-2);
    EXPECT_LT(r.base.layer_costs.values(l, l), 1e-4);
  }
}

TEST(RunHotR, ScoreIsInvariantToRotatingTheTarget) {
  hot::Rng rng(11);
  const auto a = hot_test::random_network(rng, 2, 6, 300);
  std::vector<Eigen::MatrixXd> mixed;
  for (const auto& l : a.layers()) mixed.push_back(l.values() + 0.5 * hot_test::gaussian(rng, 300, 6));
  const auto b = hot_test::network(mixed);
  std::vector<Eigen::MatrixXd> turned;
  for (const auto& l : b.layers()) turned.push_back(l.values() * householder_orthogonal(rng, 6));
  const auto c = hot_test::network(turned);

  const auto s1 = standardized(a, b);
  const auto s2 = standardized(a, c);
  const double x = hot::run_hot_r(s1.src, s1.tgt, s1.split).base.hot_score;
  const double y = hot::run_hot_r(s2.src, s2.tgt, s2.split).base.hot_score;
  EXPECT_NEAR(x, y, 0.01);
}

TEST(RunHotR, DistinctRotatedLayersGivePlantedPermutation) {
  const auto pair = rotated_pair(4, 6, 400, 12, 0.05);
  const auto s = standardized(pair.src, pair.tgt);
  const auto r = hot::run_hot_r(s.src, s.tgt, s.split);
  EXPECT_LE((r.base.outer_plan.values - pair.truth.layer_map).cwiseAbs().maxCoeff(), 1e-12);
  const auto m = hot::plan_recovery_metrics(r.base.outer_plan, pair.truth);
  EXPECT_EQ(m.top1_accuracy, 1.0);
}

TEST(RunHotR, ReconstructRotatedMatchesExplicitFormula) {
  hot::Rng rng(13);
  const auto a = hot_test::random_network(rng, 2, 4, 60);
  const auto b = hot_test::random_network(rng, 3, 4, 60);
  const auto s = standardized(a, b);
  const auto r = hot::run_hot_r(s.src, s.tgt, s.split);
  const auto rows = iota_rows(60);
  for (std::size_t l = 0; l < 2; ++l) {
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(60, 4);
    for (std::size_t m = 0; m < 3; ++m) {
      const double w = 2.0 * r.base.outer_plan.values(static_cast<Index>(l), static_cast<Index>(m));
      expected += w * s.tgt.layer(m).values() * r.base.layer_costs.plan(l, m).values.transpose() *
                  r.rotations.at(l, m).transpose();
    }
    EXPECT_LE((hot::reconstruct_rotated(l, s.tgt, r, rows) - expected).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(RunHotR, ThreadCountDoesNotChangeResults) {
  hot::Rng rng(14);
  const auto a = hot_test::random_network(rng, 3, 5, 60);
  const auto b = hot_test::random_network(rng, 2, 5, 60);
  const auto s = standardized(a, b);
  hot::HotROptions one, three;
  one.hot.threads = 1;
  three.hot.threads = 3;
  const auto x = hot::run_hot_r(s.src, s.tgt, s.split, one);
  const auto y = hot::run_hot_r(s.src, s.tgt, s.split, three);
  EXPECT_EQ(x.base.layer_costs.values, y.base.layer_costs.values);
  EXPECT_EQ(x.base.hot_score, y.base.hot_score);
}
