#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "hot/error.hpp"
#include "hot/matrix_io.hpp"
#include "hot/rng.hpp"

namespace hot {

using Index = Eigen::Index;
using IndexSet = std::vector<Index>;

/// Stimuli x neurons responses of one layer.
///
/// Immutable after construction. Construction rejects T < 2, n < 1 and any
/// non-finite entry. constant_columns() is populated by standardize() for
/// neurons with zero variance on the training rows.
class ActivationMatrix {
 public:
  ActivationMatrix(Eigen::MatrixXd values, std::string layer_name,
                   std::vector<bool> constant_columns = {})
      : values_(std::move(values)),
        layer_name_(std::move(layer_name)),
        constant_(std::move(constant_columns)) {
    if (values_.rows() < 2) {
      fail_input("layer '" + layer_name_ + "' needs at least 2 stimuli, got " +
                 std::to_string(values_.rows()));
    }
    if (values_.cols() < 1) fail_input("layer '" + layer_name_ + "' has no neurons");
    if (!values_.allFinite()) {
      for (Index r = 0; r < values_.rows(); ++r) {
        for (Index c = 0; c < values_.cols(); ++c) {
          if (!std::isfinite(values_(r, c))) {
            fail_input("non-finite entry in layer '" + layer_name_ + "' at (" +
                       std::to_string(r) + ", " + std::to_string(c) + ")");
          }
        }
      }
    }
    if (constant_.empty()) constant_.assign(static_cast<std::size_t>(values_.cols()), false);
    if (constant_.size() != static_cast<std::size_t>(values_.cols())) {
      fail_input("constant-column flags do not match width of layer '" + layer_name_ + "'");
    }
  }

  const Eigen::MatrixXd& values() const noexcept { return values_; }
  const std::string& layer_name() const noexcept { return layer_name_; }
  Index stimuli() const noexcept { return values_.rows(); }
  Index neurons() const noexcept { return values_.cols(); }
  const std::vector<bool>& constant_columns() const noexcept { return constant_; }
  std::size_t constant_count() const {
    return static_cast<std::size_t>(std::count(constant_.begin(), constant_.end(), true));
  }

 private:
  Eigen::MatrixXd values_;
  std::string layer_name_;
  std::vector<bool> constant_;
};

/// Ordered layers of one system, in architectural depth order.
class NetworkActivations {
 public:
  NetworkActivations(std::vector<ActivationMatrix> layers, std::string network_name)
      : layers_(std::move(layers)), name_(std::move(network_name)) {
    if (layers_.empty()) fail_input("network '" + name_ + "': empty layer list");
    const Index t = layers_.front().stimuli();
    for (const auto& layer : layers_) {
      if (layer.stimuli() != t) {
        fail_input("network '" + name_ + "': row-count mismatch (layer '" +
                   layers_.front().layer_name() + "' has " + std::to_string(t) +
                   " rows, layer '" + layer.layer_name() + "' has " +
                   std::to_string(layer.stimuli()) + ")");
      }
    }
  }

  const std::vector<ActivationMatrix>& layers() const noexcept { return layers_; }
  const ActivationMatrix& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t depth() const noexcept { return layers_.size(); }
  Index stimuli() const noexcept { return layers_.front().stimuli(); }
  const std::string& name() const noexcept { return name_; }

 private:
  std::vector<ActivationMatrix> layers_;
  std::string name_;
};

/// Seeded train/validation partition of stimulus rows (0-based, ascending).
struct SplitSpec {
  IndexSet train_idx;
  IndexSet val_idx;
  std::uint64_t seed = 0;
  double val_fraction = 0.2;
};

inline void require_same_stimuli(const NetworkActivations& a, const NetworkActivations& b) {
  if (a.stimuli() != b.stimuli()) {
    fail_input("row-count mismatch between networks '" + a.name() + "' (" +
               std::to_string(a.stimuli()) + ") and '" + b.name() + "' (" +
               std::to_string(b.stimuli()) + ")");
  }
}

inline Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const IndexSet& rows) {
  return m(rows, Eigen::all);
}

inline SplitSpec make_split(Index stimuli, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    fail_input("val_fraction must lie in (0, 1), got " + std::to_string(val_fraction));
  }
  if (stimuli < 5) {
    fail_input("need at least 5 stimuli to split, got " + std::to_string(stimuli));
  }
  const auto n_val = static_cast<Index>(std::llround(val_fraction * static_cast<double>(stimuli)));
  if (n_val < 1 || n_val >= stimuli) {
    fail_input("split of " + std::to_string(stimuli) + " stimuli at fraction " +
               std::to_string(val_fraction) + " leaves an empty part");
  }
  Rng rng(seed);
  const auto perm = rng.permutation(static_cast<std::size_t>(stimuli));
  SplitSpec split;
  split.seed = seed;
  split.val_fraction = val_fraction;
  split.val_idx.reserve(static_cast<std::size_t>(n_val));
  split.train_idx.reserve(static_cast<std::size_t>(stimuli - n_val));
  for (std::size_t i = 0; i < perm.size(); ++i) {
    auto& part = i < static_cast<std::size_t>(n_val) ? split.val_idx : split.train_idx;
    part.push_back(static_cast<Index>(perm[i]));
  }
  std::sort(split.val_idx.begin(), split.val_idx.end());
  std::sort(split.train_idx.begin(), split.train_idx.end());
  return split;
}

/// Z-scores every neuron with training-row mean and sample std.
/// Columns whose training variance is below 1e-12 are centered only and flagged.
inline ActivationMatrix standardize(const ActivationMatrix& layer, const SplitSpec& split) {
  if (split.train_idx.size() < 2) fail_input("standardize needs at least 2 training stimuli");
  const Eigen::MatrixXd train = select_rows(layer.values(), split.train_idx);
  const Eigen::RowVectorXd mean = train.colwise().mean();
  const double dof = static_cast<double>(train.rows() - 1);
  Eigen::MatrixXd out = layer.values().rowwise() - mean;
  std::vector<bool> constant(static_cast<std::size_t>(out.cols()), false);
  for (Index c = 0; c < out.cols(); ++c) {
    const double var = (train.col(c).array() - mean(c)).square().sum() / dof;
    if (var < 1e-12) {
      constant[static_cast<std::size_t>(c)] = true;
    } else {
      out.col(c) /= std::sqrt(var);
    }
  }
  return ActivationMatrix(std::move(out), layer.layer_name(), std::move(constant));
}

inline NetworkActivations standardize(const NetworkActivations& net, const SplitSpec& split) {
  std::vector<ActivationMatrix> layers;
  layers.reserve(net.depth());
  for (const auto& layer : net.layers()) layers.push_back(standardize(layer, split));
  return NetworkActivations(std::move(layers), net.name());
}

struct NeuronSubsample {
  ActivationMatrix layer;
  std::vector<Index> columns;  // original column of each kept neuron, ascending
};

/// Keeps k neurons drawn uniformly without replacement; k == n keeps all.
inline NeuronSubsample subsample_neurons(const ActivationMatrix& layer, Index k,
                                         std::uint64_t seed) {
  const Index n = layer.neurons();
  if (k < 1 || k > n) {
    fail_input("cannot subsample " + std::to_string(k) + " of " + std::to_string(n) +
               " neurons in layer '" + layer.layer_name() + "'");
  }
  Rng rng(seed);
  std::vector<Index> pool(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  // partial Fisher-Yates: the first k slots end up a uniform k-subset
  for (Index i = 0; i < k; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());

  Eigen::MatrixXd values = layer.values()(Eigen::all, pool);
  std::vector<bool> flags;
  flags.reserve(pool.size());
  for (Index c : pool) flags.push_back(layer.constant_columns()[static_cast<std::size_t>(c)]);
  return {ActivationMatrix(std::move(values), layer.layer_name(), std::move(flags)),
          std::move(pool)};
}

/// Reads a JSON manifest {"name": str, "layers": [path, ...]}.
/// Relative layer paths resolve against the manifest's directory.
inline NetworkActivations load_network(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) fail_input("missing file: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    fail_input("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("layers") || !manifest["layers"].is_array()) {
    fail_input("manifest " + manifest_path.string() + " lacks a \"layers\" array");
  }
  std::string name = manifest_path.stem().string();
  if (manifest.contains("name")) {
    if (!manifest["name"].is_string()) fail_input("manifest \"name\" must be a string");
    name = manifest["name"].get<std::string>();
  }
  const auto& entries = manifest["layers"];
  if (entries.empty()) fail_input("manifest " + manifest_path.string() + ": empty layer list");

  const auto base = manifest_path.has_parent_path() ? manifest_path.parent_path()
                                                    : std::filesystem::path(".");
  std::vector<ActivationMatrix> layers;
  for (const auto& entry : entries) {
    if (!entry.is_string()) fail_input("manifest layer entries must be path strings");
    std::filesystem::path p = entry.get<std::string>();
    if (p.is_relative()) p = base / p;
    layers.emplace_back(io::read_matrix(p), p.stem().string());
  }
  return NetworkActivations(std::move(layers), std::move(name));
}

/// Writes layers as NPY plus a manifest with paths relative to the manifest.
inline void save_network(const NetworkActivations& net, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["name"] = net.name();
  manifest["layers"] = nlohmann::json::array();
  for (std::size_t i = 0; i < net.depth(); ++i) {
    const std::string file = net.layer(i).layer_name() + ".npy";
    io::write_npy(dir / file, net.layer(i).values());
    manifest["layers"].push_back(file);
  }
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace hot
