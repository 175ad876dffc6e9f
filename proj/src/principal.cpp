#include "partialid/principal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "partialid/normal.hpp"
#include "partialid/optim.hpp"

namespace partialid {

namespace {

double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

// k log p with 0 log 0 = 0.
double xlogy(double k, double p) { return k == 0.0 ? 0.0 : k * std::log(p); }

double binom_ll(double k, double n, double p) { return xlogy(k, p) + xlogy(n - k, 1.0 - p); }

struct ArmCounts {
  double s0 = 0, y1 = 0, y0 = 0;  // S=0 total, (Y=1,S=1), (Y=0,S=1)
  double total() const { return s0 + y1 + y0; }
  double s1() const { return y1 + y0; }
};

std::array<ArmCounts, 2> arm_counts(const ThreeVarCounts& c) {
  std::array<ArmCounts, 2> arms;
  for (int z = 0; z < 2; ++z) {
    arms[z].s0 = static_cast<double>(c.s_total(0, z));
    arms[z].y1 = static_cast<double>(c.count(1, 1, z));
    arms[z].y0 = static_cast<double>(c.count(0, 1, z));
  }
  return arms;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

void require_principal_data(const std::array<ArmCounts, 2>& arms) {
  const double ps1 = arms[1].s1() / arms[1].total();
  const double ps0 = arms[0].s1() / arms[0].total();
  if (arms[0].s1() == 0) {
    throw DomainError("principal", "no control-arm subjects with S=1; E[Y|S=1,Z=0] is undefined");
  }
  if (arms[1].s1() == 0) {
    throw DomainError("principal", "doomed stratum is empty (Pr[S=1|Z=1] = 0); the effect is undefined");
  }
  if (ps1 > ps0) {
    throw InfeasibleError(
        "principal",
        "Pr[S=1|Z=1] = " + fmt(ps1) + " exceeds Pr[S=1|Z=0] = " + fmt(ps0) +
            "; the data contradict monotonicity S(1) <= S(0). Bounds without monotonicity are "
            "not supported",
        {ps1 - ps0}, {"Pr[S=1|Z=1] - Pr[S=1|Z=0]"});
  }
}

// Observed-data log-likelihood as a function of the strata proportions and
// outcome means.
double loglik_theta(const std::array<ArmCounts, 2>& arms, double phi_p, double phi_d,
                    double theta1, double theta0d, double theta0p) {
  const double phi_i = 1.0 - phi_p - phi_d;
  double ll = 0.0;
  ll += xlogy(arms[1].s0, 1.0 - phi_d);
  ll += xlogy(arms[1].y1, phi_d * theta1);
  ll += xlogy(arms[1].y0, phi_d * (1.0 - theta1));
  ll += xlogy(arms[0].s0, phi_i);
  ll += xlogy(arms[0].y1, phi_d * theta0d + phi_p * theta0p);
  ll += xlogy(arms[0].y0, phi_d * (1.0 - theta0d) + phi_p * (1.0 - theta0p));
  return ll;
}

struct Unpacked {
  double phi_i, phi_p, phi_d, theta1, theta0d, theta0p;
};

// x = (u_p, u_d, logit theta1, logit theta0d); immune is the softmax reference.
Unpacked unpack(const Eigen::VectorXd& x, double gamma) {
  const double m = std::max({0.0, x(0), x(1)});
  const double e_i = std::exp(-m);
  const double e_p = std::exp(x(0) - m);
  const double e_d = std::exp(x(1) - m);
  const double sum = e_i + e_p + e_d;
  return {e_i / sum, e_p / sum, e_d / sum, expit(x(2)), expit(x(3)), expit(x(3) - gamma)};
}

PrincipalIdentified<double> identified_from_proportions(double ps1, double ps0, double mu1,
                                                        double mu0) {
  PrincipalIdentified<double> pid;
  pid.ps1_1 = ps1;
  pid.ps1_0 = ps0;
  pid.mu1 = mu1;
  pid.mu0 = mu0;
  pid.pi = std::min(1.0, ps1 / ps0);
  return pid;
}

// Central difference that steps one-sided near the edges of (0, 1).
double partial(const std::function<double(const std::array<double, 4>&)>& f,
               std::array<double, 4> th, int i, double h) {
  const double up = std::min(th[i] + h, 1.0);
  const double dn = std::max(th[i] - h, 0.0);
  std::array<double, 4> tp = th;
  std::array<double, 4> tm = th;
  tp[i] = up;
  tm[i] = dn;
  return (f(tp) - f(tm)) / (up - dn);
}

double delta_se(const std::function<double(const std::array<double, 4>&)>& f,
                const std::array<double, 4>& th, const std::array<double, 4>& var) {
  double v = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double d = partial(f, th, i, 1e-6);
    v += d * d * var[i];
  }
  return std::sqrt(v);
}

}  // namespace

ExtendedGamma ExtendedGamma::finite(double v) {
  if (std::isnan(v)) throw ValidationError("principal", "gamma is NaN");
  if (std::isinf(v)) return v > 0 ? plus_infinity() : minus_infinity();
  return ExtendedGamma(Kind::finite, v);
}

double ExtendedGamma::value() const {
  if (kind_ != Kind::finite) throw DomainError("principal", "gamma is infinite");
  return value_;
}

double ExtendedGamma::capped(double cap) const {
  switch (kind_) {
    case Kind::plus_infinity: return cap;
    case Kind::minus_infinity: return -cap;
    case Kind::finite: break;
  }
  return std::clamp(value_, -cap, cap);
}

std::string ExtendedGamma::str() const {
  switch (kind_) {
    case Kind::plus_infinity: return "inf";
    case Kind::minus_infinity: return "-inf";
    case Kind::finite: break;
  }
  std::ostringstream os;
  os.precision(17);
  os << value_;
  return os.str();
}

bool operator<(const ExtendedGamma& a, const ExtendedGamma& b) {
  if (a.kind_ != b.kind_) return a.kind_ < b.kind_;
  return a.value_ < b.value_;
}

DoomedMean solve_doomed_mean(const PrincipalIdentified<double>& pid, const ExtendedGamma& gamma) {
  const double pi = pid.pi;
  const double mu0 = pid.mu0;
  if (!(pi > 0.0)) throw DomainError("principal", "doomed stratum is empty; gamma model undefined");
  if (pi >= 1.0) return {mu0, mu0};

  if (!gamma.is_finite()) {
    const double a = gamma.kind() == ExtendedGamma::Kind::plus_infinity
                         ? std::min(1.0, mu0 / pi)
                         : std::max(0.0, (mu0 - (1.0 - pi)) / pi);
    return {a, (mu0 - pi * a) / (1.0 - pi)};
  }
  if (mu0 <= 0.0) return {0.0, 0.0};
  if (mu0 >= 1.0) return {1.0, 1.0};
  if (gamma.value() == 0.0) return {mu0, mu0};

  // Bisection on t = logit a with a = expit(t), b = expit(t - gamma). For
  // fixed t every step of the residual is a monotone floating-point operation,
  // so it is non-increasing in gamma; bisection paths for a larger gamma can
  // then only branch upward, which keeps the computed curve exactly monotone.
  // Working on the logit scale keeps both a and b well conditioned when
  // |gamma| is large.
  const double g = gamma.value();
  auto expit = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  auto mix = [&](double t) { return pi * expit(t) + (1.0 - pi) * expit(t - g) - mu0; };
  double lo = -750.0;
  double hi = 750.0;
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (mix(mid) < 0.0) lo = mid;
    else hi = mid;
  }
  const double t = 0.5 * (lo + hi);
  // Rounding in expit can step an ulp past the limits at gamma = +-inf.
  const double a = std::clamp(expit(t), std::max(0.0, (mu0 - (1.0 - pi)) / pi), std::min(1.0, mu0 / pi));
  const double b = expit(t - g);
  return {a, b};
}

double beta_of_gamma(const PrincipalIdentified<double>& pid, const ExtendedGamma& gamma) {
  return pid.mu1 - solve_doomed_mean(pid, gamma).a;
}

PrincipalFit plugin_fit(const ThreeVarCounts& counts, const ExtendedGamma& gamma) {
  const auto arms = arm_counts(counts);
  require_principal_data(arms);
  const std::array<double, 4> th = {arms[1].s1() / arms[1].total(), arms[0].s1() / arms[0].total(),
                                    arms[1].y1 / arms[1].s1(), arms[0].y1 / arms[0].s1()};
  const std::array<double, 4> var = {th[0] * (1 - th[0]) / arms[1].total(),
                                     th[1] * (1 - th[1]) / arms[0].total(),
                                     th[2] * (1 - th[2]) / arms[1].s1(),
                                     th[3] * (1 - th[3]) / arms[0].s1()};
  auto beta = [&](const std::array<double, 4>& t) {
    return beta_of_gamma(identified_from_proportions(t[0], t[1], t[2], t[3]), gamma);
  };

  PrincipalFit fit;
  const auto pid = identified_from_proportions(th[0], th[1], th[2], th[3]);
  const DoomedMean ab = solve_doomed_mean(pid, gamma);
  fit.beta_hat = pid.mu1 - ab.a;
  fit.se = delta_se(beta, th, var);
  const double phi_d = th[0];
  const double phi_p = th[1] - th[0];
  fit.theta = {1.0 - th[1], phi_p, phi_d, th[2], ab.a, ab.b};
  fit.loglik = loglik_theta(arms, phi_p, phi_d, th[2], ab.a, ab.b);

  // The bound estimators have kinks at pi = 1 and where the min/max inside
  // the bound switches branch; near a kink the normal approximation fails.
  auto near_kink = [&](const std::function<double(const std::array<double, 4>&)>& arg) {
    const double sd = delta_se(arg, th, var);
    return std::abs(arg(th)) < 2.0 * sd;
  };
  if (near_kink([](const std::array<double, 4>& t) { return t[0] / t[1] - 1.0; })) {
    fit.warnings.push_back("Pr[S=1|Z=1]/Pr[S=1|Z=0] is within two standard errors of 1; "
                           "inference near this boundary is nonregular");
  }
  if (gamma.kind() == ExtendedGamma::Kind::plus_infinity &&
      near_kink([](const std::array<double, 4>& t) { return t[3] - std::min(1.0, t[0] / t[1]); })) {
    fit.warnings.push_back("lower bound truncation min{1, mu0/pi} is close to binding; "
                           "inference is nonregular");
  }
  if (gamma.kind() == ExtendedGamma::Kind::minus_infinity &&
      near_kink([](const std::array<double, 4>& t) {
        return t[3] - (1.0 - std::min(1.0, t[0] / t[1]));
      })) {
    fit.warnings.push_back("upper bound truncation max{0, .} is close to binding; "
                           "inference is nonregular");
  }
  return fit;
}

PrincipalFit mle_fit(const ThreeVarCounts& counts, const ExtendedGamma& gamma) {
  if (!gamma.is_finite()) return plugin_fit(counts, gamma);
  const auto arms = arm_counts(counts);
  require_principal_data(arms);
  const double g = gamma.value();
  const double total = arms[0].total() + arms[1].total();

  auto negll = [&](const Eigen::VectorXd& x) {
    const Unpacked u = unpack(x, g);
    return -loglik_theta(arms, u.phi_p, u.phi_d, u.theta1, u.theta0d, u.theta0p);
  };
  auto scaled = [&](const Eigen::VectorXd& x) { return negll(x) / total; };

  MinimizeOptions opts;
  opts.max_iterations = 1000;
  opts.g_tolerance = 1e-10;
  opts.f_tolerance = 1e-10 / total;
  MinimizeResult res = minimize_bfgs(scaled, Eigen::VectorXd::Zero(4), opts);
  if (!res.converged) {
    throw NumericError("principal", "likelihood maximization did not converge after " +
                                        std::to_string(res.iterations) + " iterations");
  }
  // Newton polish so the estimate is accurate well below the SE scale.
  for (int it = 0; it < 8; ++it) {
    const Eigen::VectorXd grad = numeric_gradient(scaled, res.x, 1e-6);
    if (grad.lpNorm<Eigen::Infinity>() < 1e-12) break;
    const Eigen::MatrixXd H = numeric_hessian(scaled, res.x, 1e-4);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Eigen::VectorXd step = ldlt.solve(grad);
    const Eigen::VectorXd cand = res.x - step;
    const double fc = scaled(cand);
    if (!(fc <= res.value)) break;
    res.x = cand;
    res.value = fc;
  }

  const Unpacked u = unpack(res.x, g);
  PrincipalFit fit;
  fit.iterations = res.iterations;
  fit.beta_hat = u.theta1 - u.theta0d;
  fit.loglik = -negll(res.x);
  fit.theta = {u.phi_i, u.phi_p, u.phi_d, u.theta1, u.theta0d, u.theta0p};

  const double edge = 1e-6;
  bool boundary = false;
  for (double v : fit.theta) boundary = boundary || v < edge || v > 1.0 - edge;
  if (boundary) {
    fit.warnings.push_back("a fitted probability is on the boundary of [0,1]; the observed "
                           "information is singular and the SE uses the delta method");
    fit.se = plugin_fit(counts, gamma).se;
    return fit;
  }

  const Eigen::MatrixXd info = numeric_hessian(negll, res.x, 1e-5);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 0.0) {
    throw NumericError("principal", "observed information is not positive definite");
  }
  auto beta_of_x = [&](const Eigen::VectorXd& x) {
    const Unpacked v = unpack(x, g);
    return v.theta1 - v.theta0d;
  };
  const Eigen::VectorXd grad = numeric_gradient(beta_of_x, res.x, 1e-6);
  fit.se = std::sqrt(grad.dot(ldlt.solve(grad)));
  return fit;
}

SensitivityCurve sensitivity_sweep(const ThreeVarCounts& counts,
                                   const std::vector<ExtendedGamma>& gammas, CurveMethod method) {
  if (gammas.empty()) throw ValidationError("principal", "gamma grid is empty");
  std::vector<ExtendedGamma> sorted = gammas;
  std::sort(sorted.begin(), sorted.end());
  SensitivityCurve curve;
  curve.n = counts.total();
  for (const auto& g : sorted) {
    PrincipalFit fit;
    try {
      fit = method == CurveMethod::mle ? mle_fit(counts, g) : plugin_fit(counts, g);
    } catch (const NumericError& e) {
      throw NumericError("principal", "gamma = " + g.str() + ": " + bare_message(e));
    }
    for (const auto& w : fit.warnings) {
      const std::string msg = "gamma = " + g.str() + ": " + w;
      if (std::find(curve.warnings.begin(), curve.warnings.end(), msg) == curve.warnings.end()) {
        curve.warnings.push_back(msg);
      }
    }
    curve.points.push_back({g, fit.beta_hat, fit.se});
  }
  return curve;
}

NormalityDiagnostics check_normality_conditions(const ThreeVarCounts& counts) {
  const auto arms = arm_counts(counts);
  const double n1 = arms[1].total(), s1 = arms[1].s1();
  const double n0 = arms[0].total(), s0 = arms[0].s1(), y0 = arms[0].y1;
  if (s0 == 0) throw DomainError("principal", "no control-arm subjects with S=1");

  const double ps1 = s1 / n1, ps0 = s0 / n0, mu0 = y0 / s0;
  NormalityDiagnostics d;
  d.ratio = ps1 / ps0;
  d.gap_upper = std::abs(1.0 - mu0 - d.ratio);
  d.gap_lower = std::abs(mu0 - d.ratio);

  const double ll_full = binom_ll(s1, n1, ps1) + binom_ll(s0, n0, ps0) + binom_ll(y0, s0, mu0);
  const double scale = n0 + n1;
  auto clampp = [](double p) { return std::clamp(p, 1e-9, 1.0 - 1e-9); };

  // Constrained fit: Pr[S=1|Z=1] = Pr[S=1|Z=0] * r(mu0), parameters (ps0, mu0).
  auto constrained = [&](bool upper) {
    auto r = [upper](double m) { return upper ? 1.0 - m : m; };
    auto negll = [&](const Eigen::VectorXd& x) {
      const double p0 = expit(x(0)), m = expit(x(1));
      return -(binom_ll(s1, n1, p0 * r(m)) + binom_ll(s0, n0, p0) + binom_ll(y0, s0, m)) / scale;
    };
    MinimizeOptions opts;
    opts.g_tolerance = 1e-11;
    opts.f_tolerance = 1e-14;
    double best = std::numeric_limits<double>::infinity();
    // Start at the unrestricted estimate and at the point where mu0 solves the
    // constraint exactly.
    const double m_alt = upper ? 1.0 - d.ratio : d.ratio;
    for (double m_start : {mu0, m_alt}) {
      Eigen::VectorXd x0(2);
      x0 << logit(clampp(ps0)), logit(clampp(m_start));
      const auto res = minimize_bfgs(negll, x0, opts);
      best = std::min(best, res.value);
    }
    return -best * scale;
  };
  // When the restriction already holds at the unrestricted estimate the two
  // maxima coincide and the statistic is zero.
  const double exact = 1e-14;
  d.stat_upper = d.gap_upper <= exact ? 0.0 : std::max(0.0, 2.0 * (ll_full - constrained(true)));
  d.stat_lower = d.gap_lower <= exact ? 0.0 : std::max(0.0, 2.0 * (ll_full - constrained(false)));
  d.pvalue_upper = chi2_sf_df1(d.stat_upper);
  d.pvalue_lower = chi2_sf_df1(d.stat_lower);
  return d;
}

}  // namespace partialid
