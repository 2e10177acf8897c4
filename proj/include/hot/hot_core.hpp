#pragma once

// Two-level alignment of layered systems: neuron-level OT for every layer
// pair, layer-level OT over the table of inner objectives, then held-out
// reconstruction and scoring.

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hot/cost.hpp"
#include "hot/data_model.hpp"
#include "hot/error.hpp"
#include "hot/ot.hpp"
#include "hot/parallel.hpp"

namespace hot {

struct HotOptions {
  SolverConfig solver;
  std::size_t threads = 0;  // 0: hardware concurrency
  /// When false, inner plans are discarded after their objective is known and
  /// recomputed only for layer pairs that carry outer mass.
  bool materialize_plans = true;
};

/// L x M table of optimal inner objectives plus the inner plans behind them.
struct LayerCostTable {
  Eigen::MatrixXd values;
  std::vector<std::optional<TransportPlan>> plans;  // row-major, L*M slots

  std::size_t src_depth() const noexcept { return static_cast<std::size_t>(values.rows()); }
  std::size_t tgt_depth() const noexcept { return static_cast<std::size_t>(values.cols()); }
  std::size_t slot(std::size_t l, std::size_t m) const { return l * tgt_depth() + m; }
  bool has_plan(std::size_t l, std::size_t m) const { return plans.at(slot(l, m)).has_value(); }
  const TransportPlan& plan(std::size_t l, std::size_t m) const {
    const auto& p = plans.at(slot(l, m));
    if (!p) {
      fail_input("inner plan (" + std::to_string(l) + ", " + std::to_string(m) +
                 ") was not materialized");
    }
    return *p;
  }
};

struct ScoreReport {
  Eigen::VectorXd per_layer;
  double mean = 0.0;
  std::size_t excluded_neurons = 0;  // zero-variance on the evaluation rows
  std::vector<std::size_t> excluded_per_layer;
};

struct HotResult {
  LayerCostTable layer_costs;
  TransportPlan outer_plan;  // L x M, rows 1/L, columns 1/M
  Eigen::VectorXd per_layer_scores;
  double hot_score = 0.0;
  std::size_t excluded_neurons = 0;
  SplitSpec split;
  SolverConfig solver;
};

enum class Weighting {
  verbatim,     // L * sum_m P[l,m] * Y_m Q^T, as used for scoring
  unit_weight,  // each reconstructed neuron's weights rescaled to sum to 1
};

using PlanLookup = std::function<const TransportPlan&(std::size_t, std::size_t)>;
using RotationLookup = std::function<const Eigen::MatrixXd*(std::size_t, std::size_t)>;

inline std::string pair_label(std::size_t l, std::size_t m) {
  return "layer pair (" + std::to_string(l) + ", " + std::to_string(m) + ")";
}

/// Inner OT plan for a single layer pair on the given rows.
inline TransportPlan inner_plan(const ActivationMatrix& src, const ActivationMatrix& tgt,
                                const IndexSet& rows, const SolverConfig& solver) {
  return solve(correlation_cost(src, tgt, rows).values, solver);
}

/// Solves all L*M inner problems on the training rows. Pairs are solved
/// concurrently and gathered in (l, m) order.
inline LayerCostTable inner_cost_table(const NetworkActivations& src,
                                       const NetworkActivations& tgt, const SplitSpec& split,
                                       const HotOptions& options = {}) {
  require_same_stimuli(src, tgt);
  const std::size_t L = src.depth();
  const std::size_t M = tgt.depth();
  LayerCostTable table;
  table.values.resize(static_cast<Index>(L), static_cast<Index>(M));
  table.plans.resize(L * M);
  std::vector<double> objectives(L * M, 0.0);
  parallel_for(L * M, options.threads, [&](std::size_t k) {
    const std::size_t l = k / M;
    const std::size_t m = k % M;
    try {
      TransportPlan plan = inner_plan(src.layer(l), tgt.layer(m), split.train_idx, options.solver);
      objectives[k] = plan.objective;
      if (options.materialize_plans) table.plans[k] = std::move(plan);
    } catch (const Error& e) {
      throw Error(e.kind(), pair_label(l, m) + ": " + e.what());
    }
  });
  for (std::size_t k = 0; k < L * M; ++k) {
    table.values(static_cast<Index>(k / M), static_cast<Index>(k % M)) = objectives[k];
  }
  return table;
}

/// Layer-level coupling: exact OT over the inner objective table.
inline TransportPlan outer_plan(const LayerCostTable& costs) {
  try {
    return solve_exact(costs.values);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("outer plan: ") + e.what());
  }
}

/// Resolves inner plans from a table, recomputing (and caching) any that were
/// not materialized.
class PlanCache {
 public:
  PlanCache(const LayerCostTable& table, const NetworkActivations& src,
            const NetworkActivations& tgt, const SplitSpec& split, SolverConfig solver)
      : table_(table), src_(src), tgt_(tgt), split_(split), solver_(std::move(solver)) {}

  const TransportPlan& operator()(std::size_t l, std::size_t m) {
    if (table_.has_plan(l, m)) return table_.plan(l, m);
    auto it = extra_.find({l, m});
    if (it == extra_.end()) {
      it = extra_.emplace(std::make_pair(l, m),
                          inner_plan(src_.layer(l), tgt_.layer(m), split_.train_idx, solver_))
               .first;
    }
    return it->second;
  }

  PlanLookup lookup() {
    return [this](std::size_t l, std::size_t m) -> const TransportPlan& { return (*this)(l, m); };
  }

 private:
  const LayerCostTable& table_;
  const NetworkActivations& src_;
  const NetworkActivations& tgt_;
  const SplitSpec& split_;
  SolverConfig solver_;
  std::map<std::pair<std::size_t, std::size_t>, TransportPlan> extra_;
};

/// sum_m weights[m] * Y_m[rows] * Q_{lm}^T (* R_{lm}^T) for source layer l.
/// Target layers with zero weight are skipped, so their plans are never requested.
inline Eigen::MatrixXd reconstruct_with(std::size_t l, Index src_width,
                                        const NetworkActivations& tgt,
                                        const Eigen::Ref<const Eigen::RowVectorXd>& weights,
                                        const PlanLookup& plans, const RotationLookup& rotations,
                                        const IndexSet& rows, Weighting weighting) {
  if (static_cast<std::size_t>(weights.size()) != tgt.depth()) {
    fail_input("reconstruct: weight row length does not match target depth");
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Index>(rows.size()), src_width);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(src_width);
  for (std::size_t m = 0; m < tgt.depth(); ++m) {
    const double w = weights(static_cast<Index>(m));
    if (w == 0.0) continue;
    const TransportPlan& q = plans(l, m);
    if (q.rows() != src_width || q.cols() != tgt.layer(m).neurons()) {
      fail_input("reconstruct: plan shape does not match " + pair_label(l, m));
    }
    Eigen::MatrixXd part = select_rows(tgt.layer(m).values(), rows) * q.values.transpose();
    if (rotations) {
      if (const Eigen::MatrixXd* r = rotations(l, m)) part = part * r->transpose();
    }
    out += w * part;
    mass += w * q.values.rowwise().sum();
  }
  if (weighting == Weighting::unit_weight) {
    for (Index i = 0; i < src_width; ++i) {
      if (mass(i) > 0.0) out.col(i) /= mass(i);
    }
  }
  return out;
}

/// Scores reconstructions of every source layer under layer weights W (L x M,
/// already including the factor L). Neurons constant on `rows` are excluded.
inline ScoreReport score_with(const NetworkActivations& src, const NetworkActivations& tgt,
                              const Eigen::MatrixXd& weights, const PlanLookup& plans,
                              const RotationLookup& rotations, const IndexSet& rows) {
  if (rows.size() < 2) fail_input("score: validation part too small (< 2 rows)");
  const std::size_t L = src.depth();
  ScoreReport report;
  report.per_layer = Eigen::VectorXd::Zero(static_cast<Index>(L));
  report.excluded_per_layer.assign(L, 0);
  for (std::size_t l = 0; l < L; ++l) {
    const auto& x = src.layer(l);
    const Eigen::MatrixXd recon = reconstruct_with(l, x.neurons(), tgt, weights.row(static_cast<Index>(l)),
                                                   plans, rotations, rows, Weighting::verbatim);
    const Eigen::MatrixXd orig = select_rows(x.values(), rows);
    double sum = 0.0;
    std::size_t used = 0;
    for (Index i = 0; i < x.neurons(); ++i) {
      const Eigen::VectorXd oi = orig.col(i);
      const double dof = static_cast<double>(oi.size() - 1);
      if ((oi.array() - oi.mean()).square().sum() / dof < kVarianceFloor) {
        ++report.excluded_per_layer[l];
        continue;
      }
      sum += pearson(oi, recon.col(i)).value;
      ++used;
    }
    report.per_layer(static_cast<Index>(l)) = used ? sum / static_cast<double>(used) : 0.0;
    report.excluded_neurons += report.excluded_per_layer[l];
  }
  report.mean = report.per_layer.mean();
  return report;
}

/// Reconstruction of source layer l on `rows` from the HOT coupling.
inline Eigen::MatrixXd reconstruct(std::size_t l, const NetworkActivations& tgt,
                                   const HotResult& result, const IndexSet& rows,
                                   Weighting weighting = Weighting::verbatim) {
  const auto L = static_cast<std::size_t>(result.outer_plan.rows());
  if (l >= L) {
    fail_input("reconstruct: source layer " + std::to_string(l) + " out of range (L = " +
               std::to_string(L) + ")");
  }
  for (Index r : rows) {
    if (r < 0 || r >= tgt.stimuli()) fail_input("reconstruct: row index out of range");
  }
  const Eigen::RowVectorXd weights =
      static_cast<double>(L) * result.outer_plan.values.row(static_cast<Index>(l));
  Index width = -1;
  for (std::size_t m = 0; m < tgt.depth(); ++m) {
    if (result.layer_costs.has_plan(l, m)) {
      width = result.layer_costs.plan(l, m).rows();
      break;
    }
  }
  if (width < 0) fail_input("reconstruct: no inner plan available for source layer " + std::to_string(l));
  const PlanLookup plans = [&](std::size_t a, std::size_t b) -> const TransportPlan& {
    return result.layer_costs.plan(a, b);
  };
  return reconstruct_with(l, width, tgt, weights, plans, nullptr, rows, weighting);
}

inline Eigen::MatrixXd scaled_outer(const TransportPlan& outer) {
  return static_cast<double>(outer.rows()) * outer.values;
}

/// Per-layer and global scores of a HOT result on its validation rows.
inline ScoreReport score(const NetworkActivations& src, const NetworkActivations& tgt,
                         const HotResult& result) {
  PlanCache cache(result.layer_costs, src, tgt, result.split, result.solver);
  return score_with(src, tgt, scaled_outer(result.outer_plan), cache.lookup(), nullptr,
                    result.split.val_idx);
}

/// Inner tables -> outer coupling -> held-out scores. Inputs should already be
/// standardized with the same split.
inline HotResult run_hot(const NetworkActivations& src, const NetworkActivations& tgt,
                         const SplitSpec& split, const HotOptions& options = {}) {
  HotResult result;
  result.split = split;
  result.solver = options.solver;
  result.layer_costs = inner_cost_table(src, tgt, split, options);
  result.outer_plan = outer_plan(result.layer_costs);

  if (!options.materialize_plans) {
    // Recompute just the plans on the support of the outer coupling.
    const std::size_t L = src.depth();
    const std::size_t M = tgt.depth();
    std::vector<std::size_t> needed;
    for (std::size_t k = 0; k < L * M; ++k) {
      if (result.outer_plan.values(static_cast<Index>(k / M), static_cast<Index>(k % M)) > 0.0) {
        needed.push_back(k);
      }
    }
    parallel_for(needed.size(), options.threads, [&](std::size_t i) {
      const std::size_t k = needed[i];
      result.layer_costs.plans[k] =
          inner_plan(src.layer(k / M), tgt.layer(k % M), split.train_idx, options.solver);
    });
  }

  const ScoreReport report = score(src, tgt, result);
  result.per_layer_scores = report.per_layer;
  result.hot_score = report.mean;
  result.excluded_neurons = report.excluded_neurons;
  return result;
}

}  // namespace hot
