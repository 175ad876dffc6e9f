#pragma once

// Small unconstrained minimizers for the likelihood fits.

#include <functional>

#include <Eigen/Dense>

namespace partialid {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct MinimizeOptions {
  int max_iterations = 500;
  double f_tolerance = 1e-12;  // stop when the decrease per step falls below this
  double g_tolerance = 1e-8;
  double gradient_step = 1e-6;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Central differences.
Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double h);
Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double h);

// BFGS with numeric gradients and a backtracking Armijo line search.
MinimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0,
                             const MinimizeOptions& opts = {});

}  // namespace partialid
