#pragma once

// BFGS maximizer with Armijo backtracking.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace beinf {

struct BfgsOptions {
  int max_iterations = 500;
  double grad_tol = 1e-8;      // max-norm of the gradient
  double rel_tol = 1e-12;      // |dL| / max(1, |L|) over one accepted step
  double armijo_c1 = 1e-4;
  int max_backtracks = 60;
  // The relative-change rule and a stalled line search only count as
  // convergence when the gradient max-norm is below this.
  double stationary_tol = 1e-6;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  bool converged = false;
  std::string termination;
  std::vector<double> trace;  // objective after every accepted step, starting at x0
};

namespace detail {

// Hessian of -f by forward differences of the gradient, symmetrized.
template <class Gradient>
Eigen::MatrixXd differenced_hessian(Gradient&& gradient, const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double step = 1e-5 * std::max(1.0, std::fabs(x(i)));
    Eigen::VectorXd xi = x;
    xi(i) += step;
    h.col(i) = (g - gradient(xi)) / step;
  }
  return 0.5 * (h + h.transpose());
}

// Inverse on the eigen-directions with clearly positive curvature; zero elsewhere.
inline Eigen::MatrixXd flat_safe_inverse(const Eigen::MatrixXd& h) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double floor = 1e-10 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
  Eigen::VectorXd inv(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) inv(i) = lambda(i) > floor ? 1.0 / lambda(i) : 0.0;
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace detail

/// Maximizes f starting at x0. `value(x)` returns the objective (or a very
/// negative sentinel outside the domain); `gradient(x)` its gradient.
template <class Value, class Gradient>
BfgsResult bfgs_maximize(Value&& value, Gradient&& gradient, Eigen::VectorXd x0,
                         const BfgsOptions& opt = {}) {
  const Eigen::Index n = x0.size();
  BfgsResult res;
  res.x = std::move(x0);
  res.value = value(res.x);
  res.grad = gradient(res.x);
  res.trace.push_back(res.value);

  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd H = identity;  // inverse Hessian of -f
  bool scaled = false;

  auto max_norm = [](const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); };

  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    const double gnorm = max_norm(res.grad);
    if (gnorm < opt.grad_tol) {
      res.converged = true;
      res.termination = "gradient below tolerance";
      return res;
    }

    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      Eigen::VectorXd d = H * res.grad;
      double slope = res.grad.dot(d);
      if (attempt == 1 || !(slope > 0.0) || !std::isfinite(slope)) {
        H = identity;
        scaled = false;
        d = res.grad / gnorm;
        slope = res.grad.dot(d);
      }
      if (!scaled) {
        // Before any curvature information, cap the first trial step at unit length.
        const double dn = max_norm(d);
        if (dn > 1.0) {
          d /= dn;
          slope /= dn;
        }
      }
      double alpha = 1.0;
      for (int bt = 0; bt <= opt.max_backtracks; ++bt) {
        x_new = res.x + alpha * d;
        f_new = value(x_new);
        if (std::isfinite(f_new) && f_new >= res.value + opt.armijo_c1 * alpha * slope) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted && !scaled) break;  // steepest ascent already failed
    }

    if (!accepted) {
      res.iterations = iter - 1;
      res.converged = gnorm < opt.stationary_tol;
      res.termination = "line search stalled";
      return res;
    }

    const Eigen::VectorXd g_new = gradient(x_new);
    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = res.grad - g_new;  // change in the gradient of -f
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        H = (sy / y.squaredNorm()) * identity;
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left = identity - rho * s * y.transpose();
      H = left * H * left.transpose() + rho * s * s.transpose();
    }

    const double rel_change = std::fabs(f_new - res.value) / std::max(1.0, std::fabs(res.value));
    res.x = x_new;
    res.value = f_new;
    res.grad = g_new;
    res.iterations = iter;
    res.trace.push_back(f_new);
    if (rel_change < opt.rel_tol) {
      if (max_norm(g_new) < opt.stationary_tol) {
        res.converged = true;
        res.termination = "relative log-likelihood change below tolerance";
        return res;
      }
      // No progress away from a stationary point. The secant estimate is
      // usually dominated by a coefficient drifting off to infinity, so
      // rebuild it from differenced gradients and leave flat directions alone.
      H = detail::flat_safe_inverse(detail::differenced_hessian(gradient, res.x, res.grad));
      scaled = true;
    }
  }
  res.converged = max_norm(res.grad) < opt.grad_tol;
  res.termination = res.converged ? "gradient below tolerance" : "iteration limit reached";
  return res;
}

}  // namespace beinf
