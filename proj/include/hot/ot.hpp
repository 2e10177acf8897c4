#pragma once

// Discrete optimal transport between uniform marginals.
//
// solve_exact is a successive-shortest-path min-cost flow on the integer
// rescaling of the problem: rows supply n_tgt/g units, columns demand
// n_src/g units (g = gcd). Every augmentation moves an integer amount, so
// the result is a vertex of the transportation polytope and, for square
// inputs, exactly (1/n) times a permutation matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "hot/cost.hpp"
#include "hot/error.hpp"

namespace hot {

struct TransportPlan {
  Eigen::MatrixXd values;  // n_src x n_tgt, nonnegative
  double row_mass = 0.0;   // 1 / n_src
  double col_mass = 0.0;   // 1 / n_tgt
  double objective = 0.0;  // <cost, values>
  std::size_t iterations = 0;
  bool converged = true;  // false: Sinkhorn hit max_iter and the iterate was rounded

  Index rows() const noexcept { return values.rows(); }
  Index cols() const noexcept { return values.cols(); }
};

enum class SolverKind { exact, sinkhorn };

struct SinkhornOptions {
  /// Absolute regularization; when <= 0, relative_epsilon * mean(|cost|) is used.
  double epsilon = 0.0;
  double relative_epsilon = 0.05;
  double tol = 1e-7;
  std::size_t max_iter = 10000;
  bool log_domain = false;
};

struct SolverConfig {
  SolverKind kind = SolverKind::exact;
  SinkhornOptions sinkhorn;
};

namespace detail {

inline void check_cost(const Eigen::MatrixXd& cost, const char* who) {
  if (cost.rows() < 1 || cost.cols() < 1) {
    fail_input(std::string(who) + ": cost matrix has a zero dimension");
  }
  if (!cost.allFinite()) fail_input(std::string(who) + ": cost matrix has non-finite entries");
}

inline TransportPlan finish_plan(Eigen::MatrixXd values, const Eigen::MatrixXd& cost,
                                 std::size_t iterations) {
  TransportPlan plan;
  plan.values = values.cwiseMax(0.0);
  plan.row_mass = 1.0 / static_cast<double>(cost.rows());
  plan.col_mass = 1.0 / static_cast<double>(cost.cols());
  plan.objective = (plan.values.array() * cost.array()).sum();
  plan.iterations = iterations;
  return plan;
}

/// Moves an approximately feasible plan onto the uniform-marginal polytope:
/// overfull rows, then overfull columns, are scaled down, and the missing
/// mass is added back as a rank-one term. The L1 change is at most twice the
/// marginal violation of the input.
inline Eigen::MatrixXd round_to_marginals(Eigen::MatrixXd f) {
  const double a = 1.0 / static_cast<double>(f.rows());
  const double b = 1.0 / static_cast<double>(f.cols());
  f = f.cwiseMax(0.0);
  const Eigen::VectorXd rows = f.rowwise().sum();
  for (Index i = 0; i < f.rows(); ++i) {
    if (rows(i) > a) f.row(i) *= a / rows(i);
  }
  const Eigen::RowVectorXd cols = f.colwise().sum();
  for (Index j = 0; j < f.cols(); ++j) {
    if (cols(j) > b) f.col(j) *= b / cols(j);
  }
  const Eigen::VectorXd row_gap = (a - f.rowwise().sum().array()).cwiseMax(0.0).matrix();
  const Eigen::RowVectorXd col_gap = (b - f.colwise().sum().array()).cwiseMax(0.0).matrix();
  const double missing = row_gap.sum();
  if (missing > 0.0) f += row_gap * col_gap / missing;
  return f;
}

inline TransportPlan unconverged_plan(const Eigen::MatrixXd& iterate, const Eigen::MatrixXd& cost,
                                      std::size_t iterations) {
  TransportPlan plan = finish_plan(round_to_marginals(iterate), cost, iterations);
  plan.converged = false;
  return plan;
}

}  // namespace detail

inline TransportPlan solve_exact(const Eigen::MatrixXd& cost) {
  detail::check_cost(cost, "solve_exact");
  const std::int64_t ns = cost.rows();
  const std::int64_t nt = cost.cols();
  const std::int64_t g = std::gcd(ns, nt);
  const std::int64_t supply = nt / g;
  const std::int64_t demand = ns / g;
  const std::int64_t total = ns * supply;

  const auto nodes = static_cast<std::size_t>(ns + nt);
  std::vector<std::int64_t> flow(static_cast<std::size_t>(ns * nt), 0);
  std::vector<std::int64_t> rem_supply(static_cast<std::size_t>(ns), supply);
  std::vector<std::int64_t> rem_demand(static_cast<std::size_t>(nt), demand);

  // Node potentials: rows first, then columns. Reduced cost of an arc u->v
  // is c(u,v) + h[u] - h[v] and stays >= 0 on every residual arc.
  std::vector<double> h(nodes, 0.0);
  for (std::int64_t j = 0; j < nt; ++j) h[static_cast<std::size_t>(ns + j)] = cost.col(j).minCoeff();

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(nodes);
  std::vector<std::int64_t> parent(nodes);
  std::vector<char> settled(nodes);

  // Each augmentation moves >= 1 unit, so `total` bounds the iteration count.
  const std::size_t max_augment = static_cast<std::size_t>(total + ns + nt);
  std::size_t augmentations = 0;

  for (std::int64_t r = 0; r < ns; ++r) {
    while (rem_supply[static_cast<std::size_t>(r)] > 0) {
      if (++augmentations > max_augment) {
        fail_solver("solve_exact: no convergence after " + std::to_string(augmentations - 1) +
                    " augmentations");
      }
      std::fill(dist.begin(), dist.end(), inf);
      std::fill(parent.begin(), parent.end(), -1);
      std::fill(settled.begin(), settled.end(), 0);
      dist[static_cast<std::size_t>(r)] = 0.0;

      std::int64_t target = -1;
      for (;;) {
        std::int64_t u = -1;
        double best = inf;
        for (std::size_t v = 0; v < nodes; ++v) {
          if (!settled[v] && dist[v] < best) {
            best = dist[v];
            u = static_cast<std::int64_t>(v);
          }
        }
        if (u < 0) fail_solver("solve_exact: residual graph disconnected");
        settled[static_cast<std::size_t>(u)] = 1;
        if (u >= ns && rem_demand[static_cast<std::size_t>(u - ns)] > 0) {
          target = u;
          break;
        }
        if (u < ns) {
          const double hu = h[static_cast<std::size_t>(u)];
          for (std::int64_t j = 0; j < nt; ++j) {
            const auto v = static_cast<std::size_t>(ns + j);
            if (settled[v]) continue;
            const double rc = std::max(0.0, cost(u, j) + hu - h[v]);
            if (best + rc < dist[v]) {
              dist[v] = best + rc;
              parent[v] = u;
            }
          }
        } else {
          const std::int64_t j = u - ns;
          const double hu = h[static_cast<std::size_t>(u)];
          for (std::int64_t i = 0; i < ns; ++i) {
            const auto v = static_cast<std::size_t>(i);
            if (settled[v] || flow[static_cast<std::size_t>(i * nt + j)] == 0) continue;
            const double rc = std::max(0.0, -cost(i, j) + hu - h[v]);
            if (best + rc < dist[v]) {
              dist[v] = best + rc;
              parent[v] = u;
            }
          }
        }
      }

      const double reach = dist[static_cast<std::size_t>(target)];
      for (std::size_t v = 0; v < nodes; ++v) h[v] += settled[v] ? dist[v] : reach;

      std::int64_t delta = std::min(rem_supply[static_cast<std::size_t>(r)],
                                    rem_demand[static_cast<std::size_t>(target - ns)]);
      for (std::int64_t v = target; v != r;) {
        const std::int64_t u = parent[static_cast<std::size_t>(v)];
        if (u >= ns) delta = std::min(delta, flow[static_cast<std::size_t>(v * nt + (u - ns))]);
        v = u;
      }
      for (std::int64_t v = target; v != r;) {
        const std::int64_t u = parent[static_cast<std::size_t>(v)];
        if (u < ns) {
          flow[static_cast<std::size_t>(u * nt + (v - ns))] += delta;
        } else {
          flow[static_cast<std::size_t>(v * nt + (u - ns))] -= delta;
        }
        v = u;
      }
      rem_supply[static_cast<std::size_t>(r)] -= delta;
      rem_demand[static_cast<std::size_t>(target - ns)] -= delta;
    }
  }

  Eigen::MatrixXd values(ns, nt);
  const double scale = 1.0 / static_cast<double>(total);
  for (std::int64_t i = 0; i < ns; ++i) {
    for (std::int64_t j = 0; j < nt; ++j) {
      values(i, j) = static_cast<double>(flow[static_cast<std::size_t>(i * nt + j)]) * scale;
    }
  }
  return detail::finish_plan(std::move(values), cost, augmentations);
}

inline TransportPlan solve_exact(const CostMatrix& cost) { return solve_exact(cost.values); }

/// Entropy-regularized OT (Sinkhorn-Knopp). Column marginals are exact on
/// return; row marginals are within tol. If tol is not reached in max_iter
/// iterations the last iterate is rounded onto the marginals and returned
/// with converged = false.
inline TransportPlan solve_sinkhorn(const Eigen::MatrixXd& cost, double epsilon,
                                    std::size_t max_iter = 10000, double tol = 1e-7,
                                    bool log_domain = false) {
  detail::check_cost(cost, "solve_sinkhorn");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    fail_input("solve_sinkhorn: epsilon must be positive and finite");
  }
  if (max_iter < 1) fail_input("solve_sinkhorn: max_iter must be at least 1");
  const Index ns = cost.rows();
  const Index nt = cost.cols();
  const double a = 1.0 / static_cast<double>(ns);
  const double b = 1.0 / static_cast<double>(nt);
  const Eigen::MatrixXd shifted = cost.array() - cost.minCoeff();

  if (!log_domain) {
    // Scalar exp with denormals flushed: Eigen's vectorized exp saturates near
    // 5e-309 instead of reaching 0, which would hide underflow.
    const Eigen::MatrixXd kernel = (-shifted / epsilon).unaryExpr([](double x) {
      const double k = std::exp(x);
      return k < std::numeric_limits<double>::min() ? 0.0 : k;
    });
    Eigen::VectorXd u = Eigen::VectorXd::Ones(ns);
    Eigen::VectorXd v = Eigen::VectorXd::Ones(nt);
    auto underflow = [](const Eigen::VectorXd& x) {
      return !x.allFinite() || (x.array() <= 0.0).any();
    };
    for (std::size_t it = 1; it <= max_iter; ++it) {
      const Eigen::VectorXd kv = kernel * v;
      if (underflow(kv)) {
        fail_solver("solve_sinkhorn: numerical underflow at epsilon " + std::to_string(epsilon) +
                    "; use log-domain or larger epsilon");
      }
      u = (a / kv.array()).matrix();
      const Eigen::VectorXd ktu = kernel.transpose() * u;
      if (underflow(ktu) || !u.allFinite()) {
        fail_solver("solve_sinkhorn: numerical underflow at epsilon " + std::to_string(epsilon) +
                    "; use log-domain or larger epsilon");
      }
      v = (b / ktu.array()).matrix();
      const double err = (u.array() * (kernel * v).array() - a).abs().maxCoeff();
      if (!std::isfinite(err)) {
        fail_solver("solve_sinkhorn: numerical underflow; use log-domain or larger epsilon");
      }
      if (err <= tol || it == max_iter) {
        Eigen::MatrixXd plan = u.asDiagonal() * kernel * v.asDiagonal();
        if (err <= tol) return detail::finish_plan(std::move(plan), cost, it);
        return detail::unconverged_plan(plan, cost, it);
      }
    }
    fail_input("solve_sinkhorn: max_iter must be at least 1");
  }

  // Log-domain dual updates; immune to kernel underflow.
  const double log_a = std::log(a);
  const double log_b = std::log(b);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(ns);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(nt);
  auto plan_of = [&]() {
    Eigen::MatrixXd z = (-shifted).colwise() + f;
    z.rowwise() += g.transpose();
    return Eigen::MatrixXd((z / epsilon).array().exp());
  };
  for (std::size_t it = 1; it <= max_iter; ++it) {
    for (Index i = 0; i < ns; ++i) {
      const Eigen::ArrayXd z = (g.array() - shifted.row(i).transpose().array()) / epsilon;
      const double m = z.maxCoeff();
      f(i) = epsilon * (log_a - (m + std::log((z - m).exp().sum())));
    }
    for (Index j = 0; j < nt; ++j) {
      const Eigen::ArrayXd z = (f.array() - shifted.col(j).array()) / epsilon;
      const double m = z.maxCoeff();
      g(j) = epsilon * (log_b - (m + std::log((z - m).exp().sum())));
    }
    if (!f.allFinite() || !g.allFinite()) {
      fail_solver("solve_sinkhorn: non-finite dual potentials; use larger epsilon");
    }
    if (it % 10 == 0 || it == max_iter) {
      Eigen::MatrixXd plan = plan_of();
      const double err = (plan.rowwise().sum().array() - a).abs().maxCoeff();
      if (err <= tol) return detail::finish_plan(std::move(plan), cost, it);
      if (it == max_iter) return detail::unconverged_plan(plan, cost, it);
    }
  }
  fail_input("solve_sinkhorn: max_iter must be at least 1");
}

/// Regularization actually used for a cost matrix under the given options.
inline double effective_epsilon(const Eigen::MatrixXd& cost, const SinkhornOptions& opt) {
  if (opt.epsilon > 0.0) return opt.epsilon;
  const double scale = cost.size() ? cost.cwiseAbs().mean() : 0.0;
  return opt.relative_epsilon * (scale > 0.0 ? scale : 1.0);
}

inline TransportPlan solve(const Eigen::MatrixXd& cost, const SolverConfig& config) {
  if (config.kind == SolverKind::exact) return solve_exact(cost);
  const auto& s = config.sinkhorn;
  return solve_sinkhorn(cost, effective_epsilon(cost, s), s.max_iter, s.tol, s.log_domain);
}

/// Exhaustive search over permutations; square inputs up to 8x8.
inline TransportPlan brute_force(const Eigen::MatrixXd& cost) {
  detail::check_cost(cost, "brute_force");
  if (cost.rows() != cost.cols()) fail_input("brute_force: cost must be square");
  if (cost.rows() > 8) fail_input("brute_force: at most 8x8 supported");
  const Index n = cost.rows();
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::vector<Index> best_perm = perm;
  double best = std::numeric_limits<double>::infinity();
  std::size_t visited = 0;
  do {
    double total = 0.0;
    for (Index i = 0; i < n; ++i) total += cost(i, perm[static_cast<std::size_t>(i)]);
    ++visited;
    if (total < best) {
      best = total;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) values(i, best_perm[static_cast<std::size_t>(i)]) = 1.0 / static_cast<double>(n);
  return detail::finish_plan(std::move(values), cost, visited);
}

struct PlanReport {
  double max_row_error = 0.0;
  double max_col_error = 0.0;
  double min_entry = 0.0;

  double max_marginal_error() const { return std::max(max_row_error, max_col_error); }
};

inline PlanReport validate_plan(const TransportPlan& plan) {
  PlanReport report;
  if (plan.values.size() == 0) return report;
  const double a = 1.0 / static_cast<double>(plan.rows());
  const double b = 1.0 / static_cast<double>(plan.cols());
  report.max_row_error = (plan.values.rowwise().sum().array() - a).abs().maxCoeff();
  report.max_col_error = (plan.values.colwise().sum().array() - b).abs().maxCoeff();
  report.min_entry = plan.values.minCoeff();
  return report;
}

}  // namespace hot
