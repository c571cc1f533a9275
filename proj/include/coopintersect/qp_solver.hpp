#pragma once

#include <Eigen/Dense>

namespace coopintersect::qp {

/// minimize 0.5 x'Hx + g'x  subject to  C x >= d  (one row of C per constraint).
struct DenseQp {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd linear;
  Eigen::MatrixXd constraints;
  Eigen::VectorXd lower;
};

enum class SolveStatus { optimal, infeasible, iteration_limit };

struct SolverSettings {
  int max_iterations = 10000;
};

struct SolverResult {
  SolveStatus status = SolveStatus::infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;  // 0.5 x'Hx + g'x
  int iterations = 0;
  int active_constraints = 0;
};

/// Dual active-set method of Goldfarb and Idnani for strictly convex QPs.
/// Requires a symmetric positive definite Hessian; throws std::invalid_argument otherwise.
[[nodiscard]] SolverResult solve_dense(const DenseQp& problem, const SolverSettings& settings = {});

/// Largest violation max(0, d_i - C_i x) over all rows.
[[nodiscard]] double max_violation(const DenseQp& problem, const Eigen::VectorXd& x);

}  // namespace coopintersect::qp
