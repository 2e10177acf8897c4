#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "hot/data_model.hpp"
#include "hot/error.hpp"

namespace hot {

/// Variances below this are treated as zero.
inline constexpr double kVarianceFloor = 1e-12;

struct Correlation {
  double value = 0.0;
  bool degenerate = false;  // one side had (numerically) zero variance
};

inline Correlation pearson(const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size()) {
    fail_input("pearson: length mismatch (" + std::to_string(x.size()) + " vs " +
               std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) fail_input("pearson: need at least 2 samples");
  const Eigen::ArrayXd xc = x.array() - x.mean();
  const Eigen::ArrayXd yc = y.array() - y.mean();
  const double dof = static_cast<double>(x.size() - 1);
  const double sxx = xc.square().sum();
  const double syy = yc.square().sum();
  if (sxx / dof < kVarianceFloor || syy / dof < kVarianceFloor) return {0.0, true};
  const double r = (xc * yc).sum() / std::sqrt(sxx * syy);
  return {std::clamp(r, -1.0, 1.0), false};
}

/// Neuron-to-neuron cost between two layers; entries are correlation distances.
struct CostMatrix {
  Eigen::MatrixXd values;  // n_src x n_tgt, in [0, 2]
  std::string src_layer;
  std::string tgt_layer;
};

namespace detail {

// Centers columns and scales them to unit Euclidean norm; degenerate columns become zero.
inline Eigen::MatrixXd unit_columns(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m.rowwise() - m.colwise().mean();
  const double dof = static_cast<double>(m.rows() - 1);
  for (Index c = 0; c < out.cols(); ++c) {
    const double ss = out.col(c).squaredNorm();
    if (ss / dof < kVarianceFloor) {
      out.col(c).setZero();
    } else {
      out.col(c) /= std::sqrt(ss);
    }
  }
  return out;
}

}  // namespace detail

/// Pearson correlation of every source column with every target column.
inline Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& src, const Eigen::MatrixXd& tgt) {
  if (src.rows() != tgt.rows()) fail_input("correlation_matrix: row-count mismatch");
  if (src.rows() < 2) fail_input("correlation needs at least 2 rows");
  Eigen::MatrixXd r = detail::unit_columns(src).transpose() * detail::unit_columns(tgt);
  return r.cwiseMax(-1.0).cwiseMin(1.0);
}

/// cost[i, j] = 1 - pearson(src[:, i], tgt[:, j]) over the selected rows.
/// Pairs touching a zero-variance column get cost 1.
inline CostMatrix correlation_cost(const ActivationMatrix& src, const ActivationMatrix& tgt,
                                   const IndexSet& rows) {
  if (rows.size() < 2) fail_input("correlation_cost: fewer than 2 rows selected");
  if (src.stimuli() != tgt.stimuli()) fail_input("correlation_cost: row-count mismatch");
  CostMatrix cost;
  cost.values = (1.0 - correlation_matrix(select_rows(src.values(), rows),
                                          select_rows(tgt.values(), rows)).array())
                    .matrix();
  cost.src_layer = src.layer_name();
  cost.tgt_layer = tgt.layer_name();
  return cost;
}

}  // namespace hot
