#include "partialid/optim.hpp"

#include <cmath>

namespace partialid {

Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double h) {
  const Eigen::Index k = x.size();
  Eigen::MatrixXd H(k, k);
  const double f0 = f(x);
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < k; ++i) {
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    H(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
    for (Eigen::Index j = 0; j < i; ++j) {
      auto eval = [&](double si, double sj) {
        xp(i) = x(i) + si * h;
        xp(j) = x(j) + sj * h;
        const double v = f(xp);
        xp(i) = x(i);
        xp(j) = x(j);
        return v;
      };
      H(i, j) = H(j, i) =
          (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4.0 * h * h);
    }
  }
  return H;
}

MinimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const MinimizeOptions& opts) {
  const Eigen::Index k = x0.size();
  MinimizeResult res;
  res.x = std::move(x0);
  res.value = f(res.x);
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(k, k);
  Eigen::VectorXd g = numeric_gradient(f, res.x, opts.gradient_step);

  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it + 1;
    if (g.lpNorm<Eigen::Infinity>() < opts.g_tolerance) {
      res.converged = true;
      return res;
    }
    Eigen::VectorXd dir = -Hinv * g;
    if (dir.dot(g) >= 0.0) {
      Hinv.setIdentity();
      dir = -g;
    }
    double step = 1.0;
    double fnew = f(res.x + dir);
    while (!(fnew <= res.value + 1e-4 * step * dir.dot(g)) && step > 1e-12) {
      step *= 0.5;
      fnew = f(res.x + step * dir);
    }
    if (!(fnew <= res.value)) {
      // No descent along the search direction; the gradient is at noise level.
      res.converged = g.lpNorm<Eigen::Infinity>() < 1e-5;
      return res;
    }
    const Eigen::VectorXd s = step * dir;
    const Eigen::VectorXd xnew = res.x + s;
    const Eigen::VectorXd gnew = numeric_gradient(f, xnew, opts.gradient_step);
    const Eigen::VectorXd y = gnew - g;
    const double decrease = res.value - fnew;
    res.x = xnew;
    res.value = fnew;
    g = gnew;
    const double sy = s.dot(y);
    if (sy > 1e-16) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(k, k);
      Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) +
             rho * s * s.transpose();
    }
    if (decrease < opts.f_tolerance && g.lpNorm<Eigen::Infinity>() < 1e-5) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

}  // namespace partialid
