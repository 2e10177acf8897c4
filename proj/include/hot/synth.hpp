#pragma once

// Synthetic layered systems with known correspondences.
//
// The source network is a chain: Gaussian stimuli pushed through random
// near-identity linear maps and tanh, so neighbouring layers stay partly
// correlated and the correlation decays with depth distance. Each kind then
// derives the target network from the source in a way whose ideal coupling
// is known in closed form.

#include <Eigen/Dense>
#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hot/data_model.hpp"
#include "hot/error.hpp"
#include "hot/ot.hpp"
#include "hot/rng.hpp"

namespace hot {

enum class SynthKind {
  identical,
  neuron_permuted,
  layer_permuted,
  rotated,
  depth_duplicated,
  hub_layer,
  independent_noise,
};

inline std::string_view to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::identical: return "identical";
    case SynthKind::neuron_permuted: return "neuron_permuted";
    case SynthKind::layer_permuted: return "layer_permuted";
    case SynthKind::rotated: return "rotated";
    case SynthKind::depth_duplicated: return "depth_duplicated";
    case SynthKind::hub_layer: return "hub_layer";
    case SynthKind::independent_noise: return "independent_noise";
  }
  return "unknown";
}

inline SynthKind parse_synth_kind(std::string_view name) {
  for (auto k : {SynthKind::identical, SynthKind::neuron_permuted, SynthKind::layer_permuted,
                 SynthKind::rotated, SynthKind::depth_duplicated, SynthKind::hub_layer,
                 SynthKind::independent_noise}) {
    if (to_string(k) == name) return k;
  }
  fail_input("unknown synth kind '" + std::string(name) + "'");
}

struct SynthSpec {
  SynthKind kind = SynthKind::identical;
  std::size_t src_depth = 4;           // L
  std::size_t tgt_depth = 0;           // M; 0 picks the natural depth for the kind
  std::vector<Index> widths = {16};    // one entry (uniform) or one per source layer
  Index stimuli = 200;                 // T
  double noise_sigma = 0.0;            // relative to per-column std
  double hub_noise_sigma = 0.6;        // noise on the hub layer's copies (hub_layer only)
  double carry = 0.5;                  // identity share of each chain map
  std::uint64_t seed = 0;
};

struct GroundTruth {
  Eigen::MatrixXd layer_map;                     // L x M expected outer masses, rows sum to 1/L
  std::vector<std::vector<Index>> neuron_maps;   // per source layer: target column of each neuron
  std::vector<Eigen::MatrixXd> rotations;        // per source layer: planted orthogonal map
};

struct SynthPair {
  NetworkActivations src;
  NetworkActivations tgt;
  GroundTruth truth;
};

namespace detail {

inline Eigen::MatrixXd gaussian(Rng& rng, Index rows, Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) m(r, c) = rng.normal();
  }
  return m;
}

inline void zscore_columns(Eigen::MatrixXd& m) {
  m.rowwise() -= m.colwise().mean();
  for (Index c = 0; c < m.cols(); ++c) {
    const double sd = std::sqrt(m.col(c).squaredNorm() / static_cast<double>(m.rows()));
    if (sd > 0.0) m.col(c) /= sd;
  }
}

inline std::vector<Eigen::MatrixXd> chain(Rng& rng, const std::vector<Index>& widths, Index stimuli,
                                          double carry) {
  std::vector<Eigen::MatrixXd> layers;
  Eigen::MatrixXd x = gaussian(rng, stimuli, widths.front());
  layers.push_back(x);
  const double mix = std::sqrt(std::max(0.0, 1.0 - carry * carry));
  for (std::size_t l = 1; l < widths.size(); ++l) {
    const Index n_in = widths[l - 1];
    const Index n_out = widths[l];
    Eigen::MatrixXd map = mix / std::sqrt(static_cast<double>(n_in)) * gaussian(rng, n_in, n_out);
    for (Index i = 0; i < std::min(n_in, n_out); ++i) map(i, i) += carry;
    x = (x * map).array().tanh().matrix();
    zscore_columns(x);
    layers.push_back(x);
  }
  return layers;
}

inline Eigen::MatrixXd noisy(Rng& rng, const Eigen::MatrixXd& x, double sigma) {
  if (sigma <= 0.0) return x;
  Eigen::MatrixXd out = x;
  for (Index c = 0; c < x.cols(); ++c) {
    const Eigen::VectorXd col = x.col(c);
    const double sd = std::sqrt((col.array() - col.mean()).square().sum() /
                                static_cast<double>(std::max<Index>(1, col.size() - 1)));
    for (Index r = 0; r < x.rows(); ++r) out(r, c) += sigma * sd * rng.normal();
  }
  return out;
}

}  // namespace detail

/// Haar-distributed orthogonal matrix (QR of a Gaussian with sign correction).
inline Eigen::MatrixXd random_orthogonal(Rng& rng, Index n) {
  const Eigen::MatrixXd g = detail::gaussian(rng, n, n);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index i = 0; i < n; ++i) {
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  }
  return q;
}

inline std::string synth_layer_name(std::size_t l) {
  std::string s = std::to_string(l);
  return "layer" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

inline SynthPair generate(const SynthSpec& spec) {
  const std::size_t L = spec.src_depth;
  if (L < 1) fail_input("synth: need at least one source layer");
  if (spec.stimuli < 2) fail_input("synth: need at least 2 stimuli");
  if (spec.noise_sigma < 0.0 || spec.hub_noise_sigma < 0.0) fail_input("synth: negative noise");
  std::vector<Index> widths;
  if (spec.widths.size() == 1) {
    widths.assign(L, spec.widths.front());
  } else if (spec.widths.size() == L) {
    widths = spec.widths;
  } else {
    fail_input("synth: widths must have 1 or L entries");
  }
  for (Index w : widths) {
    if (w < 1) fail_input("synth: widths must be positive");
  }

  std::size_t M = spec.tgt_depth;
  switch (spec.kind) {
    case SynthKind::depth_duplicated:
      if (M == 0) M = 2 * L;
      if (M % L != 0 || M / L < 2) fail_input("synth: depth_duplicated requires M = k*L with k >= 2");
      break;
    case SynthKind::hub_layer:
      if (M == 0) M = L + 1;
      if (M != L + 1) fail_input("synth: hub_layer requires M = L + 1");
      for (Index w : widths) {
        if (w != widths.front()) fail_input("synth: hub_layer requires equal widths");
      }
      break;
    case SynthKind::independent_noise:
      if (M == 0) M = L;
      break;
    default:
      if (M == 0) M = L;
      if (M != L) fail_input("synth: kind " + std::string(to_string(spec.kind)) + " requires M = L");
  }

  Rng rng(spec.seed);
  const auto base = detail::chain(rng, widths, spec.stimuli, spec.carry);
  std::vector<Eigen::MatrixXd> tgt(M);
  GroundTruth truth;
  truth.layer_map = Eigen::MatrixXd::Zero(static_cast<Index>(L), static_cast<Index>(M));
  const double row = 1.0 / static_cast<double>(L);
  auto diagonal_truth = [&] {
    for (std::size_t l = 0; l < L; ++l) truth.layer_map(static_cast<Index>(l), static_cast<Index>(l)) = row;
  };

  switch (spec.kind) {
    case SynthKind::identical:
      for (std::size_t l = 0; l < L; ++l) tgt[l] = base[l];
      diagonal_truth();
      for (std::size_t l = 0; l < L; ++l) {
        std::vector<Index> id(static_cast<std::size_t>(widths[l]));
        for (Index i = 0; i < widths[l]; ++i) id[static_cast<std::size_t>(i)] = i;
        truth.neuron_maps.push_back(std::move(id));
      }
      break;
    case SynthKind::neuron_permuted:
      for (std::size_t l = 0; l < L; ++l) {
        const auto perm = rng.permutation(static_cast<std::size_t>(widths[l]));
        const Eigen::MatrixXd x = detail::noisy(rng, base[l], spec.noise_sigma);
        tgt[l].resize(x.rows(), x.cols());
        std::vector<Index> map(perm.size());
        for (std::size_t j = 0; j < perm.size(); ++j) {
          tgt[l].col(static_cast<Index>(j)) = x.col(static_cast<Index>(perm[j]));
          map[perm[j]] = static_cast<Index>(j);
        }
        truth.neuron_maps.push_back(std::move(map));
      }
      diagonal_truth();
      break;
    case SynthKind::layer_permuted: {
      const auto perm = rng.permutation(L);
      for (std::size_t l = 0; l < L; ++l) {
        tgt[perm[l]] = detail::noisy(rng, base[l], spec.noise_sigma);
        truth.layer_map(static_cast<Index>(l), static_cast<Index>(perm[l])) = row;
      }
      break;
    }
    case SynthKind::rotated:
      for (std::size_t l = 0; l < L; ++l) {
        Eigen::MatrixXd r = random_orthogonal(rng, widths[l]);
        tgt[l] = detail::noisy(rng, base[l] * r, spec.noise_sigma);
        truth.rotations.push_back(std::move(r));
      }
      diagonal_truth();
      break;
    case SynthKind::depth_duplicated: {
      const std::size_t k = M / L;
      for (std::size_t m = 0; m < M; ++m) {
        tgt[m] = detail::noisy(rng, base[m / k], spec.noise_sigma);
        truth.layer_map(static_cast<Index>(m / k), static_cast<Index>(m)) = 1.0 / static_cast<double>(M);
      }
      break;
    }
    case SynthKind::hub_layer: {
      for (std::size_t l = 0; l < L; ++l) tgt[l] = detail::noisy(rng, base[l], spec.noise_sigma);
      // The hub holds L noisy copies of the pooled source signal, so every
      // source layer finds it moderately similar.
      Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(spec.stimuli, widths.front());
      for (const auto& x : base) pooled += x;
      detail::zscore_columns(pooled);
      Eigen::MatrixXd hub(spec.stimuli, widths.front() * static_cast<Index>(L));
      for (std::size_t c = 0; c < L; ++c) {
        hub.middleCols(static_cast<Index>(c) * widths.front(), widths.front()) =
            detail::noisy(rng, pooled, spec.hub_noise_sigma);
      }
      tgt[L] = std::move(hub);
      const double direct = 1.0 / static_cast<double>(M);
      for (std::size_t l = 0; l < L; ++l) {
        truth.layer_map(static_cast<Index>(l), static_cast<Index>(l)) = direct;
        truth.layer_map(static_cast<Index>(l), static_cast<Index>(L)) = row - direct;
      }
      break;
    }
    case SynthKind::independent_noise: {
      std::vector<Index> tgt_widths(M, widths.front());
      if (M == L) tgt_widths = widths;
      const auto other = detail::chain(rng, tgt_widths, spec.stimuli, spec.carry);
      for (std::size_t m = 0; m < M; ++m) tgt[m] = other[m];
      truth.layer_map.setConstant(1.0 / static_cast<double>(L * M));
      break;
    }
  }

  std::vector<ActivationMatrix> src_layers, tgt_layers;
  for (std::size_t l = 0; l < L; ++l) src_layers.emplace_back(base[l], synth_layer_name(l));
  for (std::size_t m = 0; m < M; ++m) tgt_layers.emplace_back(std::move(tgt[m]), synth_layer_name(m));
  return SynthPair{NetworkActivations(std::move(src_layers), "synth_src"),
                   NetworkActivations(std::move(tgt_layers), "synth_tgt"), std::move(truth)};
}

struct RecoveryMetrics {
  double top1_accuracy = 0.0;  // rows whose argmax lies on the truth support
  double mass_on_truth = 0.0;  // plan mass on the truth support
};

inline RecoveryMetrics plan_recovery_metrics(const Eigen::MatrixXd& plan, const GroundTruth& truth) {
  if (plan.rows() != truth.layer_map.rows() || plan.cols() != truth.layer_map.cols()) {
    fail_input("plan_recovery_metrics: shape mismatch");
  }
  RecoveryMetrics out;
  if (plan.size() == 0) return out;
  std::size_t hits = 0;
  for (Index r = 0; r < plan.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < plan.cols(); ++c) {
      if (plan(r, c) > plan(r, best)) best = c;
    }
    if (truth.layer_map(r, best) > 0.0) ++hits;
    for (Index c = 0; c < plan.cols(); ++c) {
      if (truth.layer_map(r, c) > 0.0) out.mass_on_truth += plan(r, c);
    }
  }
  out.top1_accuracy = static_cast<double>(hits) / static_cast<double>(plan.rows());
  out.mass_on_truth = std::clamp(out.mass_on_truth, 0.0, 1.0);
  return out;
}

inline RecoveryMetrics plan_recovery_metrics(const TransportPlan& plan, const GroundTruth& truth) {
  return plan_recovery_metrics(plan.values, truth);
}

}  // namespace hot
