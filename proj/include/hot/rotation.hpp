#pragma once

// Rotation-invariant variant: every layer pair gets an orthogonal map R
// alongside its neuron plan Q, found by alternating an OT step (correlation
// distance of the rotated source) with an orthogonal Procrustes step. The
// outer coupling is then solved on the per-entry Frobenius residuals.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "hot/cost.hpp"
#include "hot/data_model.hpp"
#include "hot/error.hpp"
#include "hot/hot_core.hpp"
#include "hot/ot.hpp"
#include "hot/parallel.hpp"

namespace hot {

struct ProcrustesResult {
  Eigen::MatrixXd rotation;
  bool rank_deficient = false;  // src^T target had a singular value below 1e-10 (relative)
};

/// Orthogonal R minimizing ||src R - target||_F: R = U V^T with
/// src^T target = U S V^T.
inline ProcrustesResult procrustes(const Eigen::MatrixXd& src, const Eigen::MatrixXd& target) {
  if (src.rows() != target.rows() || src.cols() != target.cols()) {
    fail_input("procrustes: shape mismatch (" + std::to_string(src.rows()) + "x" +
               std::to_string(src.cols()) + " vs " + std::to_string(target.rows()) + "x" +
               std::to_string(target.cols()) + ")");
  }
  const Eigen::MatrixXd cross = src.transpose() * target;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  ProcrustesResult out;
  out.rotation = svd.matrixU() * svd.matrixV().transpose();
  const auto& s = svd.singularValues();
  out.rank_deficient = s.size() == 0 || s.minCoeff() < 1e-10 * std::max(1.0, s.maxCoeff());
  return out;
}

struct RotationOptions {
  std::size_t max_outer = 10;
  double tol = 1e-5;             // stop on relative cost change below this
  double monotone_slack = 1e-7;  // allowed per-step increase of the trace
  double cost_floor = 1e-14;     // a cost this small counts as converged
};

struct PairAlignment {
  TransportPlan plan;
  Eigen::MatrixXd rotation;
  double cost = 0.0;          // ||X R - Y W^T||_F^2 / (rows * n_src), best seen
  std::vector<double> trace;  // same quantity after each alternation
  std::size_t alternations = 0;
  bool converged = false;
  bool monotone = true;
  bool rank_deficient = false;
};

/// Rows of the plan rescaled to sum to one, so Y W^T mixes target neurons
/// without shrinking them.
inline Eigen::MatrixXd row_normalized(const TransportPlan& plan) {
  Eigen::VectorXd mass = plan.values.rowwise().sum();
  for (Index i = 0; i < mass.size(); ++i) {
    if (mass(i) <= 0.0) mass(i) = 1.0;
  }
  return mass.cwiseInverse().asDiagonal() * plan.values;
}

/// ||x R - y W^T||_F^2 / (rows * n_src) with W the row-normalized plan.
inline double rotation_cost(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                            const TransportPlan& plan, const Eigen::MatrixXd& rotation) {
  const Eigen::MatrixXd residual = x * rotation - y * row_normalized(plan).transpose();
  return residual.squaredNorm() / static_cast<double>(x.rows() * x.cols());
}

/// Alternates Q (OT on correlation distance of x R) and R (Procrustes) for one
/// layer pair. Starts from R = I, so the first plan is the rotation-free one.
/// Returns the best (Q, R) seen; stops early if the trace rises by more than
/// the slack.
inline PairAlignment alternate_minimize(const ActivationMatrix& src, const ActivationMatrix& tgt,
                                        const IndexSet& rows, const RotationOptions& options,
                                        const SolverConfig& solver) {
  if (rows.size() < 2) fail_input("alternate_minimize: fewer than 2 rows");
  const Eigen::MatrixXd x = select_rows(src.values(), rows);
  const Eigen::MatrixXd y = select_rows(tgt.values(), rows);

  PairAlignment best;
  best.cost = std::numeric_limits<double>::infinity();
  TransportPlan plan = solve((1.0 - correlation_matrix(x, y).array()).matrix(), solver);
  double previous = std::numeric_limits<double>::infinity();

  for (std::size_t it = 1; it <= options.max_outer; ++it) {
    const Eigen::MatrixXd target = y * row_normalized(plan).transpose();
    ProcrustesResult pr = procrustes(x, target);
    const double cost = (x * pr.rotation - target).squaredNorm() /
                        static_cast<double>(x.rows() * x.cols());
    best.trace.push_back(cost);
    best.alternations = it;
    if (cost > previous + options.monotone_slack) {
      best.monotone = false;
      break;
    }
    if (cost < best.cost) {
      best.cost = cost;
      best.plan = plan;
      best.rotation = pr.rotation;
      best.rank_deficient = pr.rank_deficient;
    }
    if (cost <= options.cost_floor ||
        (std::isfinite(previous) && previous - cost <= options.tol * previous)) {
      best.converged = true;
      break;
    }
    previous = cost;
    if (it == options.max_outer) break;
    plan = solve((1.0 - correlation_matrix(x * pr.rotation, y).array()).matrix(), solver);
  }
  if (!std::isfinite(best.cost)) fail_solver("alternate_minimize: no finite alignment cost");
  return best;
}

/// L x M orthogonal maps, row-major.
struct RotationSet {
  std::size_t src_depth = 0;
  std::size_t tgt_depth = 0;
  std::vector<Eigen::MatrixXd> rotations;

  const Eigen::MatrixXd& at(std::size_t l, std::size_t m) const {
    return rotations.at(l * tgt_depth + m);
  }
};

struct PairTrace {
  std::vector<double> trace;
  std::size_t alternations = 0;
  bool converged = false;
  bool monotone = true;
  bool rank_deficient = false;
};

struct HotRResult {
  HotResult base;  // layer_costs hold normalized Frobenius costs and the plans Q
  RotationSet rotations;
  std::vector<PairTrace> traces;  // row-major L*M
};

struct HotROptions {
  HotOptions hot;
  RotationOptions rotation;
};

/// Alternating minimization for all L*M pairs on the training rows.
inline std::vector<PairAlignment> align_all_pairs(const NetworkActivations& src,
                                                  const NetworkActivations& tgt,
                                                  const SplitSpec& split,
                                                  const HotROptions& options = {}) {
  require_same_stimuli(src, tgt);
  const std::size_t M = tgt.depth();
  std::vector<PairAlignment> pairs(src.depth() * M);
  parallel_for(pairs.size(), options.hot.threads, [&](std::size_t k) {
    try {
      pairs[k] = alternate_minimize(src.layer(k / M), tgt.layer(k % M), split.train_idx,
                                    options.rotation, options.hot.solver);
    } catch (const Error& e) {
      throw Error(e.kind(), pair_label(k / M, k % M) + ": " + e.what());
    }
  });
  return pairs;
}

inline RotationLookup rotation_lookup(const RotationSet& set) {
  return [&set](std::size_t l, std::size_t m) -> const Eigen::MatrixXd* { return &set.at(l, m); };
}

inline HotRResult run_hot_r(const NetworkActivations& src, const NetworkActivations& tgt,
                            const SplitSpec& split, const HotROptions& options = {}) {
  std::vector<PairAlignment> pairs = align_all_pairs(src, tgt, split, options);
  const std::size_t L = src.depth();
  const std::size_t M = tgt.depth();

  HotRResult out;
  out.rotations.src_depth = L;
  out.rotations.tgt_depth = M;
  out.rotations.rotations.resize(L * M);
  out.traces.resize(L * M);
  auto& table = out.base.layer_costs;
  table.values.resize(static_cast<Index>(L), static_cast<Index>(M));
  table.plans.resize(L * M);
  for (std::size_t k = 0; k < L * M; ++k) {
    auto& p = pairs[k];
    table.values(static_cast<Index>(k / M), static_cast<Index>(k % M)) = p.cost;
    table.plans[k] = std::move(p.plan);
    out.rotations.rotations[k] = std::move(p.rotation);
    out.traces[k] = {std::move(p.trace), p.alternations, p.converged, p.monotone, p.rank_deficient};
  }
  out.base.split = split;
  out.base.solver = options.hot.solver;
  out.base.outer_plan = outer_plan(table);

  const PlanLookup plans = [&table](std::size_t l, std::size_t m) -> const TransportPlan& {
    return table.plan(l, m);
  };
  const ScoreReport report = score_with(src, tgt, scaled_outer(out.base.outer_plan), plans,
                                        rotation_lookup(out.rotations), split.val_idx);
  out.base.per_layer_scores = report.per_layer;
  out.base.hot_score = report.mean;
  out.base.excluded_neurons = report.excluded_neurons;
  return out;
}

/// HOT+R reconstruction of source layer l: L * sum_m P[l,m] Y_m Q^T R^T.
inline Eigen::MatrixXd reconstruct_rotated(std::size_t l, const NetworkActivations& tgt,
                                           const HotRResult& result, const IndexSet& rows,
                                           Weighting weighting = Weighting::verbatim) {
  const auto& outer = result.base.outer_plan;
  if (l >= static_cast<std::size_t>(outer.rows())) fail_input("reconstruct: source layer out of range");
  const Eigen::RowVectorXd weights = static_cast<double>(outer.rows()) * outer.values.row(static_cast<Index>(l));
  const auto& table = result.base.layer_costs;
  const PlanLookup plans = [&table](std::size_t a, std::size_t b) -> const TransportPlan& {
    return table.plan(a, b);
  };
  return reconstruct_with(l, table.plan(l, 0).rows(), tgt, weights, plans,
                          rotation_lookup(result.rotations), rows, weighting);
}

}  // namespace hot
