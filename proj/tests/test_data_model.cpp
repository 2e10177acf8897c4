#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>

#include "hot/cost.hpp"
#include "hot/data_model.hpp"
#include "hot/matrix_io.hpp"
#include "test_support.hpp"

using hot::Index;
using hot_test::TempDir;

namespace {

void expect_error(const std::function<void()>& fn, const std::string& fragment,
                  hot::ErrorKind kind = hot::ErrorKind::invalid_input) {
  try {
    fn();
    FAIL() << "expected error containing '" << fragment << "'";
  } catch (const hot::Error& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    EXPECT_EQ(e.kind(), kind);
  }
}

void write_manifest(const std::filesystem::path& path, const std::vector<std::string>& layers) {
  nlohmann::json j;
  j["name"] = "toy";
  j["layers"] = layers;
  std::ofstream(path) << j.dump();
}

}  // namespace

TEST(ActivationMatrix, RejectsTooFewStimuliOrNeurons) {
  expect_error([] { hot::ActivationMatrix(Eigen::MatrixXd::Zero(1, 3), "a"); }, "");
  expect_error([] { hot::ActivationMatrix(Eigen::MatrixXd::Zero(4, 0), "a"); }, "");
}

TEST(ActivationMatrix, RejectsNonFinite) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Ones(4, 2);
  m(2, 1) = std::numeric_limits<double>::infinity();
  expect_error([&] { hot::ActivationMatrix(m, "a"); }, "non-finite entry");
}

TEST(NetworkActivations, RequiresLayersWithEqualRows) {
  expect_error([] { hot::NetworkActivations({}, "empty"); }, "empty layer list");
  std::vector<hot::ActivationMatrix> layers;
  layers.emplace_back(Eigen::MatrixXd::Ones(10, 2), "a");
  layers.emplace_back(Eigen::MatrixXd::Ones(9, 2), "b");
  expect_error([&] { hot::NetworkActivations(layers, "bad"); }, "row-count mismatch");
}

TEST(LoadNetwork, ThreeLayerManifest) {
  TempDir dir;
  hot::Rng rng(1);
  std::vector<std::string> files;
  for (int i = 0; i < 3; ++i) {
    const std::string f = "layer" + std::to_string(i) + (i == 1 ? ".csv" : ".npy");
    const Eigen::MatrixXd m = hot_test::gaussian(rng, 100, 8);
    if (i == 1) hot::io::write_csv(dir / f, m); else hot::io::write_npy(dir / f, m);
    files.push_back(f);
  }
  write_manifest(dir / "manifest.json", files);
  const auto net = hot::load_network(dir / "manifest.json");
  EXPECT_EQ(net.depth(), 3u);
  EXPECT_EQ(net.stimuli(), 100);
  EXPECT_EQ(net.name(), "toy");
  EXPECT_EQ(net.layer(1).layer_name(), "layer1");
}

TEST(LoadNetwork, RowCountMismatch) {
  TempDir dir;
  hot::io::write_npy(dir / "a.npy", Eigen::MatrixXd::Ones(100, 8));
  hot::io::write_npy(dir / "b.npy", Eigen::MatrixXd::Ones(99, 8));
  write_manifest(dir / "m.json", {"a.npy", "b.npy"});
  expect_error([&] { hot::load_network(dir / "m.json"); }, "row-count mismatch");
}

TEST(LoadNetwork, NaNInFile) {
  TempDir dir;
  Eigen::MatrixXd m = Eigen::MatrixXd::Ones(10, 3);
  m(4, 2) = std::numeric_limits<double>::quiet_NaN();
  hot::io::write_npy(dir / "a.npy", m);
  write_manifest(dir / "m.json", {"a.npy"});
  expect_error([&] { hot::load_network(dir / "m.json"); }, "non-finite entry");
}

TEST(LoadNetwork, MissingFilesAndEmptyList) {
  TempDir dir;
  expect_error([&] { hot::load_network(dir / "nope.json"); }, "missing file");
  write_manifest(dir / "m.json", {"absent.npy"});
  expect_error([&] { hot::load_network(dir / "m.json"); }, "missing file");
  write_manifest(dir / "e.json", {});
  expect_error([&] { hot::load_network(dir / "e.json"); }, "empty layer list");
}

TEST(LoadNetwork, SaveRoundTrip) {
  TempDir dir;
  hot::Rng rng(3);
  const auto net = hot_test::random_network(rng, 2, 5, 12);
  hot::save_network(net, dir / "out");
  const auto back = hot::load_network(dir / "out" / "manifest.json");
  ASSERT_EQ(back.depth(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(back.layer(i).values(), net.layer(i).values());
}

TEST(MakeSplit, SizesFromFraction) {
  const auto s = hot::make_split(1000, 0.2, 7);
  EXPECT_EQ(s.val_idx.size(), 200u);
  EXPECT_EQ(s.train_idx.size(), 800u);
  const auto t = hot::make_split(10, 0.2, 1);
  EXPECT_EQ(t.val_idx.size(), 2u);
  EXPECT_EQ(t.train_idx.size(), 8u);
}

TEST(MakeSplit, PartitionsAndIsDeterministic) {
  const auto a = hot::make_split(137, 0.3, 99);
  const auto b = hot::make_split(137, 0.3, 99);
  EXPECT_EQ(a.train_idx, b.train_idx);
  EXPECT_EQ(a.val_idx, b.val_idx);
  std::set<Index> all(a.train_idx.begin(), a.train_idx.end());
  for (Index v : a.val_idx) EXPECT_TRUE(all.insert(v).second) << "overlap at " << v;
  EXPECT_EQ(all.size(), 137u);
  EXPECT_EQ(*all.begin(), 0);
  EXPECT_EQ(*all.rbegin(), 136);
}

TEST(MakeSplit, DistinctSeedsGiveDistinctPartitions) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    EXPECT_NE(hot::make_split(100, 0.2, 2 * s).val_idx, hot::make_split(100, 0.2, 2 * s + 1).val_idx);
  }
}

TEST(MakeSplit, RejectsBadArguments) {
  expect_error([] { hot::make_split(4, 0.2, 0); }, "");
  expect_error([] { hot::make_split(100, 0.0, 0); }, "");
  expect_error([] { hot::make_split(100, 1.0, 0); }, "");
  expect_error([] { hot::make_split(5, 0.01, 0); }, "");
}

TEST(Standardize, TrainStatisticsGiveZeroMeanUnitStd) {
  hot::Rng rng(5);
  Eigen::MatrixXd m(40, 2);
  for (Index r = 0; r < 40; ++r) {
    m(r, 0) = 5.0 + 2.0 * rng.normal();
    m(r, 1) = 3.0;
  }
  const auto split = hot::make_split(40, 0.25, 2);
  const auto z = hot::standardize(hot::ActivationMatrix(m, "x"), split);
  const Eigen::MatrixXd train = hot::select_rows(z.values(), split.train_idx);
  const Eigen::VectorXd c0 = train.col(0);
  const double mean = c0.mean();
  const double sd = std::sqrt((c0.array() - mean).square().sum() / (c0.size() - 1));
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(sd, 1.0, 1e-12);
  EXPECT_TRUE(z.values().col(1).isZero(0.0));
  EXPECT_FALSE(z.constant_columns()[0]);
  EXPECT_TRUE(z.constant_columns()[1]);
  EXPECT_EQ(z.constant_count(), 1u);
}

TEST(Standardize, IdempotentAndPreservesCorrelations) {
  hot::Rng rng(6);
  const Eigen::MatrixXd m = hot_test::gaussian(rng, 60, 4) * 3.0 + Eigen::MatrixXd::Constant(60, 4, 1.5);
  const auto split = hot::make_split(60, 0.2, 11);
  const auto once = hot::standardize(hot::ActivationMatrix(m, "x"), split);
  const auto twice = hot::standardize(once, split);
  EXPECT_TRUE(once.values().isApprox(twice.values(), 1e-12));
  EXPECT_LE((once.values() - twice.values()).cwiseAbs().maxCoeff(), 1e-12);
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 4; ++j) {
      EXPECT_NEAR(hot::pearson(m.col(i), m.col(j)).value,
                  hot::pearson(once.values().col(i), once.values().col(j)).value, 1e-10);
    }
  }
}

TEST(Subsample, FullSelectionIsIdentity) {
  hot::Rng rng(8);
  const hot::ActivationMatrix layer(hot_test::gaussian(rng, 10, 8), "x");
  const auto s = hot::subsample_neurons(layer, 8, 4);
  EXPECT_EQ(s.columns, (std::vector<Index>{0, 1, 2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(s.layer.values(), layer.values());
}

TEST(Subsample, DeterministicAndRecordsColumns) {
  hot::Rng rng(9);
  const hot::ActivationMatrix layer(hot_test::gaussian(rng, 3, 4096), "wide");
  const auto a = hot::subsample_neurons(layer, 256, 3);
  const auto b = hot::subsample_neurons(layer, 256, 3);
  EXPECT_EQ(a.columns, b.columns);
  ASSERT_EQ(a.columns.size(), 256u);
  EXPECT_TRUE(std::is_sorted(a.columns.begin(), a.columns.end()));
  EXPECT_EQ(std::set<Index>(a.columns.begin(), a.columns.end()).size(), 256u);
  for (std::size_t k = 0; k < a.columns.size(); ++k) {
    EXPECT_EQ(a.layer.values().col(static_cast<Index>(k)), layer.values().col(a.columns[k]));
  }
  EXPECT_NE(hot::subsample_neurons(layer, 256, 4).columns, a.columns);
}

TEST(Subsample, RejectsKAboveWidth) {
  const hot::ActivationMatrix layer(Eigen::MatrixXd::Ones(5, 4), "x");
  expect_error([&] { hot::subsample_neurons(layer, 5, 0); }, "cannot subsample");
  expect_error([&] { hot::subsample_neurons(layer, 0, 0); }, "cannot subsample");
}

// Each of the n columns is selected with probability k/n.
TEST(Subsample, InclusionFrequencyIsUniform) {
  const hot::ActivationMatrix layer(Eigen::MatrixXd::Random(3, 10), "x");
  std::vector<int> hits(10, 0);
  const int draws = 4000;
  for (int s = 0; s < draws; ++s)
    for (Index c : hot::subsample_neurons(layer, 3, static_cast<std::uint64_t>(s)).columns) ++hits[static_cast<std::size_t>(c)];
  for (int h : hits) EXPECT_NEAR(h / double(draws), 0.3, 0.04);
}
