#include "coopintersect/qp_solver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace coopintersect::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Working factorization: J = L^{-T} Q and the upper-triangular R of the active normals.
struct Factorization {
  Eigen::MatrixXd J;
  Eigen::MatrixXd R;
  double r_norm = 1.0;
};

// Givens rotation zeroing b against a; returns false when both vanish.
struct Givens {
  double c = 1.0;
  double s = 0.0;
  double h = 0.0;
};

Givens make_givens(double a, double b) {
  Givens g;
  g.h = std::hypot(a, b);
  if (g.h < kEps) return g;
  g.c = a / g.h;
  g.s = b / g.h;
  if (g.c < 0.0) {
    g.c = -g.c;
    g.s = -g.s;
    g.h = -g.h;
  }
  return g;
}

bool add_constraint(Factorization& f, Eigen::VectorXd& d, int& iq) {
  const int n = static_cast<int>(d.size());
  for (int j = n - 1; j >= iq + 1; --j) {
    const Givens g = make_givens(d[j - 1], d[j]);
    if (std::abs(g.h) < kEps) continue;
    d[j] = 0.0;
    d[j - 1] = g.h;
    const double xny = g.s / (1.0 + g.c);
    for (int k = 0; k < n; ++k) {
      const double t1 = f.J(k, j - 1);
      const double t2 = f.J(k, j);
      f.J(k, j - 1) = t1 * g.c + t2 * g.s;
      f.J(k, j) = xny * (t1 + f.J(k, j - 1)) - t2;
    }
  }
  ++iq;
  for (int i = 0; i < iq; ++i) f.R(i, iq - 1) = d[i];
  if (std::abs(d[iq - 1]) <= kEps * f.r_norm) return false;
  f.r_norm = std::max(f.r_norm, std::abs(d[iq - 1]));
  return true;
}

void delete_constraint(Factorization& f, std::vector<int>& active, Eigen::VectorXd& u, int& iq, int constraint) {
  const int n = static_cast<int>(f.J.rows());
  int qq = -1;
  for (int i = 0; i < iq; ++i) {
    if (active[i] == constraint) {
      qq = i;
      break;
    }
  }
  if (qq < 0) return;
  for (int i = qq; i < iq - 1; ++i) {
    active[i] = active[i + 1];
    u[i] = u[i + 1];
    f.R.col(i) = f.R.col(i + 1);
  }
  active[iq - 1] = active[iq];
  u[iq - 1] = u[iq];
  active[iq] = -1;
  u[iq] = 0.0;
  for (int j = 0; j < iq; ++j) f.R(j, iq - 1) = 0.0;
  --iq;
  if (iq == 0) return;
  for (int j = qq; j < iq; ++j) {
    const Givens g = make_givens(f.R(j, j), f.R(j + 1, j));
    if (std::abs(g.h) < kEps) continue;
    f.R(j + 1, j) = 0.0;
    f.R(j, j) = g.h;
    const double xny = g.s / (1.0 + g.c);
    for (int k = j + 1; k < iq; ++k) {
      const double t1 = f.R(j, k);
      const double t2 = f.R(j + 1, k);
      f.R(j, k) = t1 * g.c + t2 * g.s;
      f.R(j + 1, k) = xny * (t1 + f.R(j, k)) - t2;
    }
    for (int k = 0; k < n; ++k) {
      const double t1 = f.J(k, j);
      const double t2 = f.J(k, j + 1);
      f.J(k, j) = t1 * g.c + t2 * g.s;
      f.J(k, j + 1) = xny * (f.J(k, j) + t1) - t2;
    }
  }
}

}  // namespace

double max_violation(const DenseQp& problem, const Eigen::VectorXd& x) {
  if (problem.constraints.rows() == 0) return 0.0;
  const Eigen::VectorXd slack = problem.constraints * x - problem.lower;
  return std::max(0.0, -slack.minCoeff());
}

SolverResult solve_dense(const DenseQp& problem, const SolverSettings& settings) {
  const int n = static_cast<int>(problem.hessian.rows());
  const int m = static_cast<int>(problem.constraints.rows());
  if (problem.hessian.cols() != n || problem.linear.size() != n) throw std::invalid_argument("QP dimension mismatch");
  if (m > 0 && problem.constraints.cols() != n) throw std::invalid_argument("QP constraint width mismatch");
  if (problem.lower.size() != m) throw std::invalid_argument("QP bound count mismatch");

  SolverResult result;
  result.x = Eigen::VectorXd::Zero(n);
  if (n == 0) {
    result.status = SolveStatus::optimal;
    for (int i = 0; i < m; ++i) {
      if (problem.lower[i] > 0.0) result.status = SolveStatus::infeasible;
    }
    return result;
  }

  // Row-normalized constraints: N_i' x + b_i >= 0.
  Eigen::MatrixXd normals(n, m);
  Eigen::VectorXd offsets(m);
  for (int i = 0; i < m; ++i) {
    const double norm = problem.constraints.row(i).norm();
    const double scale = norm > 0.0 ? 1.0 / norm : 1.0;
    normals.col(i) = problem.constraints.row(i).transpose() * scale;
    offsets[i] = -problem.lower[i] * scale;
  }

  Eigen::LLT<Eigen::MatrixXd> llt(problem.hessian);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("QP Hessian is not positive definite");

  Factorization f;
  f.J = llt.matrixU().solve(Eigen::MatrixXd::Identity(n, n));
  f.R = Eigen::MatrixXd::Zero(n, n);
  const double c1 = problem.hessian.trace();
  const double c2 = f.J.trace();

  Eigen::VectorXd x = -llt.solve(problem.linear);
  double fval = 0.5 * problem.linear.dot(x);

  std::vector<int> active(static_cast<std::size_t>(n) + 1, -1);
  std::vector<int> active_old(active.size(), -1);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n + 1);
  Eigen::VectorXd u_old = u;
  Eigen::VectorXd x_old = x;
  Eigen::VectorXd s(m);
  Eigen::VectorXd d(n);
  Eigen::VectorXd z(n);
  Eigen::VectorXd r(n + 1);
  std::vector<char> inactive(static_cast<std::size_t>(m), 1);
  std::vector<char> allowed(static_cast<std::size_t>(m), 1);
  int iq = 0;

  const auto finish = [&](SolveStatus status) {
    result.status = status;
    result.x = x;
    result.objective = 0.5 * x.dot(problem.hessian * x) + problem.linear.dot(x);
    result.active_constraints = iq;
    return result;
  };

  for (;;) {
    // Step 1: all constraints evaluated at the current primal point.
    if (++result.iterations > settings.max_iterations) return finish(SolveStatus::iteration_limit);
    std::fill(inactive.begin(), inactive.end(), 1);
    for (int i = 0; i < iq; ++i) inactive[static_cast<std::size_t>(active[i])] = 0;
    double psi = 0.0;
    for (int i = 0; i < m; ++i) {
      allowed[static_cast<std::size_t>(i)] = 1;
      s[i] = normals.col(i).dot(x) + offsets[i];
      psi += std::min(0.0, s[i]);
    }
    if (std::abs(psi) <= m * kEps * c1 * c2 * 100.0) return finish(SolveStatus::optimal);
    for (int i = 0; i < iq; ++i) {
      u_old[i] = u[i];
      active_old[i] = active[i];
    }
    x_old = x;

    bool restart_outer = false;
    while (!restart_outer) {
      // Step 2: most violated admissible constraint.
      int ip = -1;
      double most = 0.0;
      for (int i = 0; i < m; ++i) {
        if (s[i] < most && inactive[static_cast<std::size_t>(i)] && allowed[static_cast<std::size_t>(i)]) {
          most = s[i];
          ip = i;
        }
      }
      if (ip < 0) return finish(SolveStatus::optimal);
      const Eigen::VectorXd np = normals.col(ip);
      u[iq] = 0.0;
      active[iq] = ip;

      for (;;) {
        if (++result.iterations > settings.max_iterations) return finish(SolveStatus::iteration_limit);
        // Step 2a: primal and dual step directions.
        d.noalias() = f.J.transpose() * np;
        z.noalias() = f.J.rightCols(n - iq) * d.tail(n - iq);
        for (int i = iq - 1; i >= 0; --i) {
          double acc = 0.0;
          for (int j = i + 1; j < iq; ++j) acc += f.R(i, j) * r[j];
          r[i] = (d[i] - acc) / f.R(i, i);
        }

        // Step 2b: partial (dual) and full (primal) step lengths.
        int drop = -1;
        double t1 = kInf;
        for (int k = 0; k < iq; ++k) {
          if (r[k] > 0.0 && u[k] / r[k] < t1) {
            t1 = u[k] / r[k];
            drop = active[k];
          }
        }
        double t2 = kInf;
        if (z.squaredNorm() > kEps) {
          t2 = -s[ip] / z.dot(np);
          if (t2 < 0.0) t2 = kInf;
        }
        const double t = std::min(t1, t2);
        if (t >= kInf) return finish(SolveStatus::infeasible);

        if (t2 >= kInf) {
          // Dual-only step.
          for (int k = 0; k < iq; ++k) u[k] -= t * r[k];
          u[iq] += t;
          inactive[static_cast<std::size_t>(drop)] = 1;
          delete_constraint(f, active, u, iq, drop);
          continue;
        }

        x += t * z;
        fval += t * z.dot(np) * (0.5 * t + u[iq]);
        for (int k = 0; k < iq; ++k) u[k] -= t * r[k];
        u[iq] += t;

        if (std::abs(t - t2) < kEps) {
          // Full step: ip joins the active set.
          if (!add_constraint(f, d, iq)) {
            // Linearly dependent normal: exclude it and roll back.
            allowed[static_cast<std::size_t>(ip)] = 0;
            delete_constraint(f, active, u, iq, ip);
            std::fill(inactive.begin(), inactive.end(), 1);
            for (int i = 0; i < iq; ++i) {
              active[i] = active_old[i];
              u[i] = u_old[i];
              inactive[static_cast<std::size_t>(active[i])] = 0;
            }
            x = x_old;
            break;
          }
          inactive[static_cast<std::size_t>(ip)] = 0;
          restart_outer = true;
          break;
        }

        // Partial step: drop the blocking constraint and retry ip.
        inactive[static_cast<std::size_t>(drop)] = 1;
        delete_constraint(f, active, u, iq, drop);
        s[ip] = np.dot(x) + offsets[ip];
      }
    }
  }
}

}  // namespace coopintersect::qp
