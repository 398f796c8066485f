#pragma once

// Small dense Levenberg-Marquardt over a manifold-valued parameter with a
// central finite-difference Jacobian.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace rsrel {

struct LmOptions {
  int max_iterations = 100;
  double initial_damping = 1e-3;
  double step_tolerance = 1e-10;
  double fd_step = 1e-6;
  double cost_floor = 0.0;  // determinants of well-posed systems can be tiny; no absolute floor by default
};

template <class Param>
struct LmResult {
  Param params;
  double initial_cost = 0.0;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_trace;  // cost after every accepted step, starting with the initial cost
};

/// Minimises ||f(x)||^2. `retract(x, delta)` applies a tangent-space step.
template <class Param, class Residual, class Retract>
LmResult<Param> levenberg_marquardt(const Param& x0, int dim, Residual&& f, Retract&& retract,
                                    const LmOptions& opt) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;

  LmResult<Param> out;
  out.params = x0;
  VectorXd r = f(x0);
  double cost = r.squaredNorm();
  out.initial_cost = cost;
  out.cost_trace.push_back(cost);

  auto jacobian = [&](const Param& x, int m) {
    MatrixXd j(m, dim);
    VectorXd e = VectorXd::Zero(dim);
    for (int k = 0; k < dim; ++k) {
      e[k] = opt.fd_step;
      const VectorXd fp = f(retract(x, e));
      e[k] = -opt.fd_step;
      const VectorXd fm = f(retract(x, e));
      e[k] = 0.0;
      j.col(k) = (fp - fm) / (2.0 * opt.fd_step);
    }
    return j;
  };

  Param x = x0;
  double mu = -1.0;
  bool need_jacobian = true;
  MatrixXd jtj;
  VectorXd g;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (!std::isfinite(cost)) break;
    if (cost <= opt.cost_floor) {  // exact zero always stops
      out.converged = true;
      break;
    }
    if (need_jacobian) {
      const MatrixXd j = jacobian(x, static_cast<int>(r.size()));
      jtj = j.transpose() * j;
      g = j.transpose() * r;
      need_jacobian = false;
      if (g.lpNorm<Eigen::Infinity>() < std::numeric_limits<double>::min()) {
        out.converged = true;
        break;
      }
    }
    if (mu < 0.0) mu = opt.initial_damping * std::max(jtj.diagonal().maxCoeff(), 1e-300);

    MatrixXd lhs = jtj;
    lhs.diagonal().array() += mu;
    const VectorXd delta = lhs.ldlt().solve(-g);
    if (!delta.allFinite()) {
      mu *= 10.0;
      continue;
    }
    const Param candidate = retract(x, delta);
    const VectorXd r_new = f(candidate);
    const double cost_new = r_new.squaredNorm();
    if (std::isfinite(cost_new) && cost_new < cost) {
      x = candidate;
      r = r_new;
      cost = cost_new;
      out.cost_trace.push_back(cost);
      mu = std::max(mu / 10.0, 1e-300);
      need_jacobian = true;
      if (delta.norm() < opt.step_tolerance) {
        out.converged = true;
        ++it;
        break;
      }
    } else {
      mu *= 10.0;
      // No decrease possible even with a vanishing step: stationary point.
      if (mu > 1e20 || delta.norm() < opt.step_tolerance) {
        out.converged = delta.norm() < opt.step_tolerance;
        break;
      }
    }
  }
  out.params = x;
  out.cost = cost;
  out.iterations = it;
  return out;
}

}  // namespace rsrel
