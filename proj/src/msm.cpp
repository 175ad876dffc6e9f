#include "partialid/msm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "partialid/error.hpp"

namespace partialid {

namespace {

double expit(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

int cum_before(const LongitudinalRecord& r, int t) {
  int c = 0;
  for (int k = 1; k <= t - 1; ++k) c += r.z[k];
  return c;
}

Eigen::VectorXd treatment_features(const LongitudinalRecord& r, int k, bool with_x) {
  const Eigen::Index p = with_x ? r.x[k].size() : 0;
  const Eigen::Index lead = k == 0 ? 1 : 2;
  Eigen::VectorXd f(lead + p);
  f(0) = 1.0;
  if (k > 0) f(1) = r.z[k - 1];
  if (with_x) f.tail(p) = r.x[k];
  return f;
}

// Logistic regression by IRLS. Throws when the fit runs off to infinity.
Eigen::VectorXd fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int visit) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd mu(eta.size());
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      mu(i) = expit(eta(i));
      w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-12);
    }
    const Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    const Eigen::VectorXd g = X.transpose() * (y - mu);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success) {
      throw NumericError("msm", "visit " + std::to_string(visit) + ": treatment model design is singular");
    }
    const Eigen::VectorXd step = ldlt.solve(g);
    beta += step;
    if (beta.lpNorm<Eigen::Infinity>() > 30.0) {
      throw NumericError("msm", "visit " + std::to_string(visit) +
                                    ": treatment is (quasi-)separated by the history; "
                                    "the logistic fit diverges");
    }
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) return beta;
  }
  throw NumericError("msm", "visit " + std::to_string(visit) + ": treatment model did not converge");
}

void check_cohort(const Cohort& cohort) {
  if (cohort.empty()) throw ValidationError("msm", "cohort is empty");
  const int tau = cohort.front().tau();
  const Eigen::Index p = cohort.front().x.empty() ? 0 : cohort.front().baseline().size();
  if (tau < 2) throw ValidationError("msm", "at least visits 0..2 are required");
  for (const auto& r : cohort) {
    if (r.tau() != tau || static_cast<int>(r.x.size()) != tau + 1 ||
        static_cast<int>(r.y.size()) != tau + 1) {
      throw ValidationError("msm", "subject " + std::to_string(r.id) + " has missing visits");
    }
    for (int t = 0; t <= tau; ++t) {
      if (r.z[t] != 0 && r.z[t] != 1) {
        throw ValidationError("msm", "subject " + std::to_string(r.id) + ": z must be 0 or 1");
      }
      if (r.x[t].size() != p) {
        throw ValidationError("msm", "subject " + std::to_string(r.id) + ": covariate dimension differs");
      }
      if (t >= 1 && !std::isfinite(r.y[t])) {
        throw ValidationError("msm", "subject " + std::to_string(r.id) + ": missing outcome at visit " +
                                         std::to_string(t));
      }
    }
  }
}

struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::size_t> cluster;
};

Design outcome_design(const Cohort& cohort) {
  const int tau = cohort.front().tau();
  const Eigen::Index p = cohort.front().baseline().size();
  const Eigen::Index rows = static_cast<Eigen::Index>(cohort.size()) * tau;
  Design d;
  d.X.resize(rows, 3 + p);
  d.y.resize(rows);
  d.cluster.reserve(rows);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& r = cohort[i];
    for (int t = 1; t <= tau; ++t) {
      d.X(row, 0) = 1.0;
      d.X(row, 1) = cum_before(r, t);
      d.X(row, 2) = t;
      d.X.row(row).tail(p) = r.baseline().transpose();
      d.y(row) = r.y[t];
      d.cluster.push_back(i);
      ++row;
    }
  }
  const Eigen::VectorXd cum = d.X.col(1);
  if ((cum.array() == cum(0)).all()) {
    throw DomainError("msm", "cum[z(t-1)] is constant in the cohort; eta1 is not identified");
  }
  return d;
}

IptwResult weighted_fit(const Design& d, const Eigen::VectorXd& w, std::size_t clusters) {
  const Eigen::MatrixXd XtW = d.X.transpose() * w.asDiagonal();
  const Eigen::MatrixXd XtWX = XtW * d.X;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(XtWX);
  if (lu.rank() < XtWX.rows()) {
    throw DomainError("msm", "outcome regression design is rank deficient");
  }
  IptwResult res;
  res.eta = lu.solve(XtW * d.y);
  res.eta1 = res.eta(1);
  const Eigen::VectorXd resid = d.y - d.X * res.eta;
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(clusters), d.X.cols());
  for (Eigen::Index r = 0; r < d.X.rows(); ++r) {
    scores.row(static_cast<Eigen::Index>(d.cluster[r])) += w(r) * resid(r) * d.X.row(r);
  }
  const Eigen::MatrixXd bread = lu.inverse();
  const Eigen::MatrixXd meat = scores.transpose() * scores;
  const Eigen::MatrixXd cov = bread * meat * bread;
  res.se = std::sqrt(std::max(0.0, cov(1, 1)));
  res.max_weight = w.maxCoeff();
  return res;
}

Eigen::VectorXd stabilized_weights(const Cohort& cohort, const TreatmentModel& model) {
  const int tau = cohort.front().tau();
  Eigen::VectorXd w(static_cast<Eigen::Index>(cohort.size()) * tau);
  Eigen::Index row = 0;
  for (const auto& r : cohort) {
    double prod = 1.0;
    for (int t = 1; t <= tau; ++t) {
      const int k = t - 1;
      const double pd = model.prob(r, k);
      const double pn = model.prob_marginal(r, k);
      prod *= r.z[k] == 1 ? pn / pd : (1.0 - pn) / (1.0 - pd);
      w(row++) = prod;
    }
  }
  return w;
}

}  // namespace

void MsmSpec::validate() const {
  if (tau < 2) throw ValidationError("msm", "tau must be at least 2");
  if (beta3.empty()) throw ValidationError("msm", "at least one covariate is required");
  if (!(x_noise >= 0.0) || !(y_noise >= 0.0)) {
    throw ValidationError("msm", "noise scales must be nonnegative");
  }
}

std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t r) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(r >> 32), 0x5eedu};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Cohort simulate_cohort(const MsmSpec& spec, double confounding_strength, std::int64_t n,
                       std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw ValidationError("msm", "cohort size must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int tau = spec.tau;
  const int p = spec.covariate_dim();

  Cohort cohort;
  cohort.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    LongitudinalRecord r;
    r.id = i + 1;
    r.z.assign(tau + 1, 0);
    r.x.assign(tau + 1, Eigen::VectorXd::Zero(p));
    r.y.assign(tau + 1, std::numeric_limits<double>::quiet_NaN());
    const double u = normal(rng);
    std::vector<double> departure(tau + 1, 0.0);  // Z(k) - p_k
    for (int k = 0; k <= tau; ++k) {
      for (int j = 0; j < p; ++j) {
        if (k == 0) {
          r.x[0](j) = normal(rng);  // baseline independent of U
        } else {
          r.x[k](j) = spec.x_autocorr * r.x[k - 1](j) + spec.u_on_x * u +
                      spec.treat_on_x * r.z[k - 1] + spec.x_noise * normal(rng);
        }
      }
      double lin = spec.treat_intercept + confounding_strength * r.x[k].sum();
      if (k > 0) lin += spec.treat_prev * r.z[k - 1];
      const double pk = expit(lin);
      r.z[k] = unif(rng) < pk ? 1 : 0;
      departure[k] = r.z[k] - pk;
    }
    for (int t = 1; t <= tau; ++t) {
      double mean = spec.beta0 + spec.beta1 * cum_before(r, t) + spec.beta2 * t;
      for (int j = 0; j < p; ++j) mean += spec.beta3[j] * r.x[0](j);
      double bias = 0.0;
      for (int k = 0; k < t; ++k) bias += departure[k];
      r.y[t] = mean + spec.u_on_y * u + spec.violation_gamma * bias + spec.y_noise * normal(rng);
    }
    cohort.push_back(std::move(r));
  }
  return cohort;
}

double TreatmentModel::prob(const LongitudinalRecord& r, int k) const {
  const double v = expit(treatment_features(r, k, true).dot(denominator.at(k)));
  return std::clamp(v, lower, upper);
}

double TreatmentModel::prob_marginal(const LongitudinalRecord& r, int k) const {
  const double v = expit(treatment_features(r, k, false).dot(numerator.at(k)));
  return std::clamp(v, lower, upper);
}

TreatmentModel fit_treatment_model(const Cohort& cohort) {
  check_cohort(cohort);
  const int tau = cohort.front().tau();
  const Eigen::Index n = static_cast<Eigen::Index>(cohort.size());
  TreatmentModel model;
  // Weights use treatment at visits 0..tau-1.
  for (int k = 0; k < tau; ++k) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = cohort[i].z[k];
    if (z.sum() == 0.0 || z.sum() == static_cast<double>(n)) {
      throw ValidationError("msm", "visit " + std::to_string(k) + ": every subject has z = " +
                                       std::to_string(static_cast<int>(z(0))) +
                                       "; the treatment model is not identified (separation)");
    }
    for (bool with_x : {true, false}) {
      const Eigen::VectorXd f0 = treatment_features(cohort[0], k, with_x);
      Eigen::MatrixXd X(n, f0.size());
      for (Eigen::Index i = 0; i < n; ++i) X.row(i) = treatment_features(cohort[i], k, with_x);
      auto beta = fit_logistic(X, z, k);
      (with_x ? model.denominator : model.numerator).push_back(std::move(beta));
    }
  }
  for (const auto& r : cohort) {
    for (int k = 0; k < tau; ++k) {
      const double v = expit(treatment_features(r, k, true).dot(model.denominator[k]));
      if (v < model.lower || v > model.upper) ++model.truncated;
    }
  }
  return model;
}

IptwResult iptw_estimate(const Cohort& cohort, const TreatmentModel& model) {
  check_cohort(cohort);
  const Design d = outcome_design(cohort);
  return weighted_fit(d, stabilized_weights(cohort, model), cohort.size());
}

IptwResult naive_estimate(const Cohort& cohort) {
  check_cohort(cohort);
  const Design d = outcome_design(cohort);
  return weighted_fit(d, Eigen::VectorXd::Ones(d.y.size()), cohort.size());
}

Cohort bias_adjust(const Cohort& cohort, const TreatmentModel& model, const CFunctionSpec& c) {
  check_cohort(cohort);
  const double gamma = c.gamma;
  if (gamma == 0.0) return cohort;
  Cohort out = cohort;
  const int tau = cohort.front().tau();
  for (auto& r : out) {
    double b = 0.0;
    for (int t = 1; t <= tau; ++t) {
      const int k = t - 1;
      const double p1 = model.prob(r, k);
      // c = gamma (2 z(k) - 1) times the fitted probability of the other arm.
      b += r.z[k] == 1 ? gamma * (1.0 - p1) : -gamma * p1;
      r.y[t] -= b;
    }
  }
  return out;
}

std::vector<MsmSweepPoint> sensitivity_sweep_msm(const Cohort& cohort,
                                                 const std::vector<double>& gammas) {
  if (gammas.empty()) throw ValidationError("msm", "gamma grid is empty");
  std::vector<double> sorted = gammas;
  std::sort(sorted.begin(), sorted.end());
  const TreatmentModel model = fit_treatment_model(cohort);
  std::vector<MsmSweepPoint> out;
  for (double g : sorted) {
    const IptwResult fit = iptw_estimate(bias_adjust(cohort, model, {CFunctionForm::brumback_sign, g}), model);
    out.push_back({g, fit.eta1, fit.se});
  }
  return out;
}

void write_cohort_csv(std::ostream& out, const Cohort& cohort) {
  check_cohort(cohort);
  const Eigen::Index p = cohort.front().baseline().size();
  out << "id,visit,z";
  if (p == 1) out << ",x";
  else
    for (Eigen::Index j = 0; j < p; ++j) out << ",x" << j + 1;
  out << ",y\n";
  out << std::setprecision(17);
  for (const auto& r : cohort) {
    for (int t = 0; t <= r.tau(); ++t) {
      out << r.id << ',' << t << ',' << r.z[t];
      for (Eigen::Index j = 0; j < p; ++j) out << ',' << r.x[t](j);
      out << ',';
      if (t >= 1) out << r.y[t];
      out << '\n';
    }
  }
}

Cohort read_cohort_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("msm", "cohort CSV is empty");
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      f.push_back(cell);
    }
    if (!s.empty() && s.back() == ',') f.emplace_back();
    return f;
  };
  const auto header = split(line);
  if (header.size() < 5 || header[0] != "id" || header[1] != "visit" || header[2] != "z" ||
      header.back() != "y") {
    throw ParseError("msm", "cohort CSV header must be id,visit,z,x...,y");
  }
  const std::size_t p = header.size() - 4;
  std::map<std::int64_t, std::map<int, std::tuple<int, Eigen::VectorXd, double>>> rows;
  std::vector<std::int64_t> order;
  std::size_t line_no = 1;
  auto number = [&](const std::string& s, const char* what) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ParseError("msm", "line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != header.size()) {
      throw ParseError("msm", "line " + std::to_string(line_no) + ": wrong number of fields");
    }
    const auto id = static_cast<std::int64_t>(number(f[0], "id"));
    const int visit = static_cast<int>(number(f[1], "visit"));
    const int z = static_cast<int>(number(f[2], "z"));
    Eigen::VectorXd x(static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) x(static_cast<Eigen::Index>(j)) = number(f[3 + j], "x");
    const double y = f.back().empty() || f.back() == "NA" ? std::numeric_limits<double>::quiet_NaN()
                                                          : number(f.back(), "y");
    if (!rows.count(id)) order.push_back(id);
    if (!rows[id].emplace(visit, std::make_tuple(z, x, y)).second) {
      throw ParseError("msm", "line " + std::to_string(line_no) + ": duplicate visit");
    }
  }
  Cohort cohort;
  for (auto id : order) {
    LongitudinalRecord r;
    r.id = id;
    int expect = 0;
    for (const auto& [visit, v] : rows[id]) {
      if (visit != expect++) {
        throw ValidationError("msm", "subject " + std::to_string(id) + " has missing visits");
      }
      r.z.push_back(std::get<0>(v));
      r.x.push_back(std::get<1>(v));
      r.y.push_back(std::get<2>(v));
    }
    cohort.push_back(std::move(r));
  }
  check_cohort(cohort);
  return cohort;
}

}  // namespace partialid
