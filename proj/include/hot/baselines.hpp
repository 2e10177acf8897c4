#pragma once

// Reference alignments built from the same inner plans as HOT, differing only
// in how source layers are paired with target layers.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "hot/hot_core.hpp"
#include "hot/rng.hpp"
#include "hot/rotation.hpp"

namespace hot {

enum class BaselineMethod { perm_p, single_best, pairwise_best, pairwise_best_rot };

inline std::string_view to_string(BaselineMethod method) {
  switch (method) {
    case BaselineMethod::perm_p: return "perm_p";
    case BaselineMethod::single_best: return "single_best";
    case BaselineMethod::pairwise_best: return "pairwise_best";
    case BaselineMethod::pairwise_best_rot: return "pairwise_best_rot";
  }
  return "unknown";
}

struct BaselineResult {
  BaselineMethod method = BaselineMethod::perm_p;
  /// perm_p: source row of P placed at each row. Others: chosen target layer per source layer.
  std::vector<std::size_t> assignment;
  Eigen::MatrixXd weights;  // L x M reconstruction weights actually used
  Eigen::VectorXd per_layer_scores;
  double mean_score = 0.0;
  std::size_t excluded_neurons = 0;
};

namespace detail {

// Lowest index wins ties.
template <typename Better>
std::vector<std::size_t> pick_per_row(const Eigen::MatrixXd& m, Better better) {
  std::vector<std::size_t> out(static_cast<std::size_t>(m.rows()), 0);
  for (Index r = 0; r < m.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < m.cols(); ++c) {
      if (better(m(r, c), m(r, best))) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<std::size_t>(best);
  }
  return out;
}

inline Eigen::MatrixXd one_hot(const std::vector<std::size_t>& choice, std::size_t cols) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Index>(choice.size()), static_cast<Index>(cols));
  for (std::size_t l = 0; l < choice.size(); ++l) w(static_cast<Index>(l), static_cast<Index>(choice[l])) = 1.0;
  return w;
}

inline BaselineResult finish(BaselineMethod method, std::vector<std::size_t> assignment,
                             Eigen::MatrixXd weights, const ScoreReport& report) {
  BaselineResult out;
  out.method = method;
  out.assignment = std::move(assignment);
  out.weights = std::move(weights);
  out.per_layer_scores = report.per_layer;
  out.mean_score = report.mean;
  out.excluded_neurons = report.excluded_neurons;
  return out;
}

}  // namespace detail

/// Rows of the outer plan shuffled by a seeded uniform permutation; inner plans kept.
inline BaselineResult perm_p(const NetworkActivations& src, const NetworkActivations& tgt,
                             const HotResult& result, std::uint64_t seed) {
  const auto L = static_cast<std::size_t>(result.outer_plan.rows());
  Rng rng(seed);
  const auto perm = rng.permutation(L);
  Eigen::MatrixXd weights(result.outer_plan.rows(), result.outer_plan.cols());
  for (std::size_t l = 0; l < L; ++l) {
    weights.row(static_cast<Index>(l)) = result.outer_plan.values.row(static_cast<Index>(perm[l]));
  }
  weights *= static_cast<double>(L);
  PlanCache cache(result.layer_costs, src, tgt, result.split, result.solver);
  const auto report = score_with(src, tgt, weights, cache.lookup(), nullptr, result.split.val_idx);
  return detail::finish(BaselineMethod::perm_p, perm, std::move(weights), report);
}

struct PermPSummary {
  std::vector<double> scores;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single draw
};

/// perm_p over seeds base_seed, base_seed + 1, ...
inline PermPSummary perm_p_summary(const NetworkActivations& src, const NetworkActivations& tgt,
                                   const HotResult& result, std::size_t draws,
                                   std::uint64_t base_seed) {
  PermPSummary out;
  for (std::size_t i = 0; i < draws; ++i) {
    out.scores.push_back(perm_p(src, tgt, result, base_seed + i).mean_score);
  }
  if (out.scores.empty()) return out;
  double sum = 0.0;
  for (double s : out.scores) sum += s;
  out.mean = sum / static_cast<double>(out.scores.size());
  if (out.scores.size() > 1) {
    double ss = 0.0;
    for (double s : out.scores) ss += (s - out.mean) * (s - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(out.scores.size() - 1));
  }
  return out;
}

/// Each source layer reconstructed only from argmax_m P[l, m].
inline BaselineResult single_best(const NetworkActivations& src, const NetworkActivations& tgt,
                                  const HotResult& result) {
  auto choice = detail::pick_per_row(result.outer_plan.values, [](double a, double b) { return a > b; });
  Eigen::MatrixXd weights = detail::one_hot(choice, tgt.depth());
  PlanCache cache(result.layer_costs, src, tgt, result.split, result.solver);
  const auto report = score_with(src, tgt, weights, cache.lookup(), nullptr, result.split.val_idx);
  return detail::finish(BaselineMethod::single_best, std::move(choice), std::move(weights), report);
}

/// Greedy: each source layer reconstructed from argmin_m C[l, m] (training costs).
inline BaselineResult pairwise_best(const NetworkActivations& src, const NetworkActivations& tgt,
                                    const HotResult& result) {
  auto choice = detail::pick_per_row(result.layer_costs.values, [](double a, double b) { return a < b; });
  Eigen::MatrixXd weights = detail::one_hot(choice, tgt.depth());
  PlanCache cache(result.layer_costs, src, tgt, result.split, result.solver);
  const auto report = score_with(src, tgt, weights, cache.lookup(), nullptr, result.split.val_idx);
  return detail::finish(BaselineMethod::pairwise_best, std::move(choice), std::move(weights), report);
}

/// Greedy on the rotation-augmented costs; predictions use Y Q^T R^T.
inline BaselineResult pairwise_best_rot(const NetworkActivations& src, const NetworkActivations& tgt,
                                        const HotRResult& result) {
  const auto& table = result.base.layer_costs;
  auto choice = detail::pick_per_row(table.values, [](double a, double b) { return a < b; });
  Eigen::MatrixXd weights = detail::one_hot(choice, tgt.depth());
  const PlanLookup plans = [&table](std::size_t l, std::size_t m) -> const TransportPlan& {
    return table.plan(l, m);
  };
  const auto report = score_with(src, tgt, weights, plans, rotation_lookup(result.rotations),
                                 result.base.split.val_idx);
  return detail::finish(BaselineMethod::pairwise_best_rot, std::move(choice), std::move(weights), report);
}

inline BaselineResult pairwise_best_rot(const NetworkActivations& src, const NetworkActivations& tgt,
                                        const SplitSpec& split, const HotROptions& options = {}) {
  return pairwise_best_rot(src, tgt, run_hot_r(src, tgt, split, options));
}

}  // namespace hot
