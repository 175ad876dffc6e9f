#include "partialid/lp.hpp"

#include <algorithm>
#include <numeric>

namespace partialid {

std::vector<std::string> potential_outcome_components() {
  return {"Y(0,0)", "Y(0,1)", "Y(1,0)", "Y(1,1)", "S(0)", "S(1)"};
}

namespace {

std::string y_name(int z, int s) {
  return "Y(" + std::to_string(z) + "," + std::to_string(s) + ")";
}

std::string s_name(int z) { return "S(" + std::to_string(z) + ")"; }

int required_index(const std::vector<std::string>& comps, const std::string& name,
                   const char* assumption) {
  const auto it = std::find(comps.begin(), comps.end(), name);
  if (it == comps.end()) {
    throw ValidationError("lp", std::string(assumption) + " needs component " + name);
  }
  return static_cast<int>(it - comps.begin());
}

}  // namespace

LatentStateSpace LatentStateSpace::build(std::vector<std::string> components,
                                         const AssumptionSet& a) {
  if (components.empty()) throw ValidationError("lp", "state space needs at least one component");
  if (components.size() > 20) throw ValidationError("lp", "too many components to enumerate");
  for (std::size_t i = 0; i < components.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (components[i] == components[j])
        throw ValidationError("lp", "duplicate component " + components[i]);

  using Rule = std::function<bool(std::uint32_t)>;
  std::vector<Rule> rules;
  auto bit = [](std::uint32_t st, int i) { return static_cast<int>((st >> i) & 1u); };

  if (a.monotonicity_S || a.monotone_S01) {
    const char* what = a.monotonicity_S ? "monotonicity_S" : "monotone_S01";
    const int s0 = required_index(components, s_name(0), what);
    const int s1 = required_index(components, s_name(1), what);
    rules.push_back([=](std::uint32_t st) { return bit(st, s1) >= bit(st, s0); });
  }
  if (a.exclusion_restriction || a.monotone_Y_in_z) {
    for (int s = 0; s < 2; ++s) {
      const int y0 = required_index(components, y_name(0, s), "exclusion/monotone_Y_in_z");
      const int y1 = required_index(components, y_name(1, s), "exclusion/monotone_Y_in_z");
      if (a.exclusion_restriction)
        rules.push_back([=](std::uint32_t st) { return bit(st, y0) == bit(st, y1); });
      if (a.monotone_Y_in_z)
        rules.push_back([=](std::uint32_t st) { return bit(st, y0) <= bit(st, y1); });
    }
  }
  if (a.monotone_Y_in_s) {
    for (int z = 0; z < 2; ++z) {
      const int ys0 = required_index(components, y_name(z, 0), "monotone_Y_in_s");
      const int ys1 = required_index(components, y_name(z, 1), "monotone_Y_in_s");
      rules.push_back([=](std::uint32_t st) { return bit(st, ys0) <= bit(st, ys1); });
    }
  }
  for (const auto& [name, v] : a.pinned) {
    const int i = required_index(components, name, "pinned value");
    if (v != 0 && v != 1) throw ValidationError("lp", "pinned value for " + name + " must be 0 or 1");
    rules.push_back([=](std::uint32_t st) { return bit(st, i) == v; });
  }

  LatentStateSpace space;
  space.components_ = std::move(components);
  const std::uint32_t count = 1u << space.components_.size();
  for (std::uint32_t st = 0; st < count; ++st) {
    if (std::all_of(rules.begin(), rules.end(), [st](const Rule& r) { return r(st); })) {
      space.states_.push_back(st);
    }
  }
  if (space.states_.empty()) {
    throw InfeasibleError("lp", "assumptions are jointly contradictory: no latent state survives");
  }
  return space;
}

int LatentStateSpace::index_of(const std::string& component) const {
  const auto it = std::find(components_.begin(), components_.end(), component);
  return it == components_.end() ? -1 : static_cast<int>(it - components_.begin());
}

int LatentStateSpace::value(std::size_t state, const std::string& component) const {
  const int i = index_of(component);
  if (i < 0) throw ValidationError("lp", "unknown component " + component);
  return static_cast<int>((states_.at(state) >> i) & 1u);
}

std::string LatentStateSpace::describe(std::size_t state) const {
  std::string out;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (i) out += ",";
    out += components_[i] + "=" + std::to_string((states_.at(state) >> i) & 1u);
  }
  return out;
}

LatentStateSpace LatentStateSpace::permuted(const std::vector<std::size_t>& order) const {
  if (order.size() != states_.size()) throw ValidationError("lp", "permutation size mismatch");
  std::vector<std::size_t> check = order;
  std::sort(check.begin(), check.end());
  for (std::size_t i = 0; i < check.size(); ++i)
    if (check[i] != i) throw ValidationError("lp", "not a permutation");
  LatentStateSpace out;
  out.components_ = components_;
  for (std::size_t i : order) out.states_.push_back(states_[i]);
  return out;
}

template <class Scalar>
LinearProgram<Scalar> LinearProgram<Scalar>::make(Vector objective, Matrix A, Vector b,
                                                  std::vector<std::string> labels) {
  if (objective.size() == 0) throw ValidationError("lp", "program has no variables");
  if (A.cols() != objective.size()) {
    throw ValidationError("lp", "constraint width does not match the state count");
  }
  if (A.rows() != b.size()) throw ValidationError("lp", "constraint rows and rhs differ in length");
  if (labels.empty()) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) labels.push_back("row " + std::to_string(i));
  }
  if (static_cast<Eigen::Index>(labels.size()) != A.rows()) {
    throw ValidationError("lp", "one label per constraint row is required");
  }
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (b(i) < Scalar(0) || b(i) > Scalar(1)) {
      throw ValidationError("lp", "rhs of " + labels[i] + " outside [0,1]");
    }
  }
  return LinearProgram{std::move(objective), std::move(A), std::move(b), std::move(labels)};
}

namespace {

template <class Scalar>
struct Tolerances;

template <>
struct Tolerances<double> {
  static double pivot() { return 1e-11; }
  static double feasibility() { return 1e-10; }
};

template <>
struct Tolerances<Rational> {
  static Rational pivot() { return Rational(0); }
  static Rational feasibility() { return Rational(0); }
};

// Tableau for min c.x, M x = r, x >= 0. Columns: n structural, m artificial,
// then the rhs. The last row holds reduced costs with -objective in the rhs.
template <class Scalar>
class Simplex {
 public:
  using Vector = typename LinearProgram<Scalar>::Vector;
  using Matrix = typename LinearProgram<Scalar>::Matrix;

  Simplex(const Matrix& M, const Vector& r) : m_(M.rows()), n_(M.cols()) {
    T_ = Matrix::Zero(m_ + 1, n_ + m_ + 1);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const bool flip = r(i) < Scalar(0);
      for (Eigen::Index j = 0; j < n_; ++j) T_(i, j) = flip ? Scalar(-M(i, j)) : M(i, j);
      T_(i, n_ + i) = Scalar(1);
      T_(i, rhs()) = flip ? Scalar(-r(i)) : r(i);
      basis_.push_back(n_ + i);
    }
    // Phase one: minimize the sum of artificials.
    for (Eigen::Index i = 0; i < m_; ++i) {
      for (Eigen::Index j = 0; j < n_; ++j) T_(m_, j) -= T_(i, j);
      T_(m_, rhs()) -= T_(i, rhs());
    }
  }

  Scalar phase_one() {
    run(n_ + m_);
    return Scalar(-T_(m_, rhs()));
  }

  Vector primal() const {
    Vector x = Vector::Zero(n_);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(basis_.size()); ++i)
      if (basis_[i] < n_) x(basis_[i]) = T_(i, rhs());
    return x;
  }

  // Pivots artificials out of the basis; rows where that is impossible are
  // linear combinations of the others and are removed.
  void drop_artificials() {
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(basis_.size());) {
      if (basis_[i] < n_) {
        ++i;
        continue;
      }
      Eigen::Index col = -1;
      Scalar best = Tolerances<Scalar>::pivot();
      for (Eigen::Index j = 0; j < n_; ++j) {
        if (abs_of(T_(i, j)) > best) {
          col = j;
          best = abs_of(T_(i, j));
        }
      }
      if (col >= 0) {
        pivot(i, col);
        ++i;
      } else {
        remove_row(i);
      }
    }
  }

  Scalar phase_two(const Vector& c) {
    const Eigen::Index rows = static_cast<Eigen::Index>(basis_.size());
    for (Eigen::Index j = 0; j < T_.cols(); ++j) T_(rows, j) = Scalar(0);
    for (Eigen::Index j = 0; j < n_; ++j) T_(rows, j) = c(j);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Scalar cb = c(basis_[i]);
      if (cb == Scalar(0)) continue;
      for (Eigen::Index j = 0; j < T_.cols(); ++j) T_(rows, j) -= cb * T_(i, j);
    }
    run(n_);
    return Scalar(-T_(rows, rhs()));
  }

 private:
  static Scalar abs_of(const Scalar& v) { return v < Scalar(0) ? Scalar(-v) : v; }
  Eigen::Index rhs() const { return T_.cols() - 1; }

  void pivot(Eigen::Index row, Eigen::Index col) {
    const Scalar p = T_(row, col);
    T_.row(row) /= p;
    for (Eigen::Index i = 0; i < T_.rows(); ++i) {
      if (i == row) continue;
      const Scalar f = T_(i, col);
      if (f == Scalar(0)) continue;
      T_.row(i) -= f * T_.row(row);
    }
    basis_[row] = col;
  }

  void remove_row(Eigen::Index row) {
    Matrix next(T_.rows() - 1, T_.cols());
    next << T_.topRows(row), T_.bottomRows(T_.rows() - row - 1);
    T_ = std::move(next);
    basis_.erase(basis_.begin() + row);
  }

  // Bland's rule: lowest-index improving column, lowest-index leaving basic.
  void run(Eigen::Index allowed_cols) {
    const Eigen::Index obj = static_cast<Eigen::Index>(basis_.size());
    for (int iter = 0; iter < 100000; ++iter) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed_cols; ++j) {
        if (T_(obj, j) < Scalar(-Tolerances<Scalar>::pivot())) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return;
      Eigen::Index leave = -1;
      Scalar best(0);
      for (Eigen::Index i = 0; i < obj; ++i) {
        if (!(T_(i, enter) > Tolerances<Scalar>::pivot())) continue;
        const Scalar ratio = T_(i, rhs()) / T_(i, enter);
        if (leave < 0 || ratio < best || (ratio == best && basis_[i] < basis_[leave])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave < 0) throw NumericError("lp", "objective unbounded on a probability simplex");
      pivot(leave, enter);
    }
    throw NumericError("lp", "simplex iteration limit reached");
  }

  Eigen::Index m_;
  Eigen::Index n_;
  Matrix T_;
  std::vector<Eigen::Index> basis_;
};

template <class Scalar>
void with_normalization(const LinearProgram<Scalar>& lp, typename LinearProgram<Scalar>::Matrix& M,
                        typename LinearProgram<Scalar>::Vector& r) {
  const Eigen::Index m = lp.A.rows();
  const Eigen::Index n = lp.A.cols();
  M.resize(m + 1, n);
  r.resize(m + 1);
  M.topRows(m) = lp.A;
  M.row(m).setConstant(Scalar(1));
  r.head(m) = lp.b;
  r(m) = Scalar(1);
}

template <class Scalar>
typename LinearProgram<Scalar>::Vector optimum(const typename LinearProgram<Scalar>::Matrix& M,
                                               const typename LinearProgram<Scalar>::Vector& r,
                                               const typename LinearProgram<Scalar>::Vector& c,
                                               const LinearProgram<Scalar>& lp) {
  Simplex<Scalar> sx(M, r);
  const Scalar infeas = sx.phase_one();
  if (infeas > Tolerances<Scalar>::feasibility()) {
    const auto q = sx.primal();
    const auto resid = (M * q - r).eval();
    std::vector<double> residuals;
    std::vector<std::string> labels = lp.labels;
    labels.push_back("sum q = 1");
    for (Eigen::Index i = 0; i < resid.size(); ++i) residuals.push_back(to_double(resid(i)));
    throw InfeasibleError("lp",
                          "observed margins are incompatible with the assumed latent states "
                          "(a testable implication fails)",
                          std::move(residuals), std::move(labels));
  }
  sx.drop_artificials();
  sx.phase_two(c);
  auto q = sx.primal();
  // Round-off can leave basic values a few ulps below zero.
  if constexpr (!ScalarTraits<Scalar>::exact) q = q.cwiseMax(Scalar(0));
  return q;
}

}  // namespace

template <class Scalar>
LpBounds<Scalar> solve_bounds(const LinearProgram<Scalar>& lp) {
  typename LinearProgram<Scalar>::Matrix M;
  typename LinearProgram<Scalar>::Vector r;
  with_normalization(lp, M, r);
  LpBounds<Scalar> out;
  out.argmin = optimum<Scalar>(M, r, lp.objective, lp);
  out.argmax = optimum<Scalar>(M, r, (-lp.objective).eval(), lp);
  Scalar lo = lp.objective.dot(out.argmin);
  Scalar hi = lp.objective.dot(out.argmax);
  if (hi < lo) hi = lo;  // only possible through double rounding
  out.bounds = Interval<Scalar>{lo, hi};
  return out;
}

Interval<double> vertex_oracle(const LinearProgram<double>& lp) {
  if (lp.num_states() > 16 || lp.num_constraints() > 10) {
    throw ValidationError("lp", "vertex enumeration budget exceeded (at most 16 states and 10 "
                                "constraints)");
  }
  Eigen::MatrixXd M;
  Eigen::VectorXd r;
  with_normalization(lp, M, r);
  const Eigen::Index n = M.cols();

  // Keep a maximal set of linearly independent rows.
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    rows.push_back(i);
    Eigen::MatrixXd sub(rows.size(), n);
    for (std::size_t k = 0; k < rows.size(); ++k) sub.row(k) = M.row(rows[k]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    lu.setThreshold(1e-10);
    if (lu.rank() < static_cast<Eigen::Index>(rows.size())) rows.pop_back();
  }
  const Eigen::Index k = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd Mr(k, n);
  Eigen::VectorXd rr(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    Mr.row(i) = M.row(rows[i]);
    rr(i) = r(rows[i]);
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::vector<bool> pick(n, false);
  std::fill(pick.end() - k, pick.end(), true);
  do {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j)
      if (pick[j]) cols.push_back(j);
    Eigen::MatrixXd B(k, k);
    for (Eigen::Index j = 0; j < k; ++j) B.col(j) = Mr.col(cols[j]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd xb = lu.solve(rr);
    if (xb.minCoeff() < -1e-10) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < k; ++j) x(cols[j]) = std::max(0.0, xb(j));
    if ((M * x - r).lpNorm<Eigen::Infinity>() > 1e-9) continue;
    const double v = lp.objective.dot(x);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  } while (std::next_permutation(pick.begin(), pick.end()));

  if (lo > hi) {
    throw InfeasibleError("lp", "no basic feasible solution: margins are incompatible with the "
                                "assumed latent states");
  }
  return {lo, hi};
}

template <class Scalar>
LinearProgram<Scalar> build_margin_program(const LatentStateSpace& space,
                                           const ObservedLaw<Scalar>& law,
                                           const StateObjective& objective) {
  const Eigen::Index n = static_cast<Eigen::Index>(space.size());
  typename LinearProgram<Scalar>::Vector c(n);
  for (Eigen::Index j = 0; j < n; ++j) c(j) = Scalar(objective(space, j));

  typename LinearProgram<Scalar>::Matrix A = LinearProgram<Scalar>::Matrix::Zero(8, n);
  typename LinearProgram<Scalar>::Vector b(8);
  std::vector<std::string> labels;
  Eigen::Index row = 0;
  for (int z = 0; z < 2; ++z) {
    for (int y = 0; y < 2; ++y) {
      for (int s = 0; s < 2; ++s) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (space.value(j, s_name(z)) == s && space.value(j, y_name(z, s)) == y) {
            A(row, j) = Scalar(1);
          }
        }
        b(row) = law.cell(y, s, z);
        labels.push_back("p_" + std::to_string(y) + std::to_string(s) + "." + std::to_string(z));
        ++row;
      }
    }
  }
  return LinearProgram<Scalar>::make(std::move(c), std::move(A), std::move(b), std::move(labels));
}

int gate_objective(const LatentStateSpace& space, std::size_t state) {
  const bool treated_one = space.value(state, "Y(0,1)") == 1 && space.value(state, "Y(1,1)") == 1;
  const bool control_one = space.value(state, "Y(0,0)") == 1 && space.value(state, "Y(1,0)") == 1;
  return static_cast<int>(treated_one) - static_cast<int>(control_one);
}

template <class Scalar>
LinearProgram<Scalar> build_gate_program(const ObservedLaw<Scalar>& law,
                                         const AssumptionSet& assumptions) {
  if (!assumptions.exclusion_restriction) {
    throw DomainError("lp", "GATE is defined only under the exclusion restriction");
  }
  if (!law.outcome_defined_when_s0()) {
    throw DomainError("lp", "GATE needs the outcome recorded for both values of S");
  }
  const auto space = LatentStateSpace::build(potential_outcome_components(), assumptions);
  return build_margin_program(space, law, gate_objective);
}

template struct LinearProgram<double>;
template struct LinearProgram<Rational>;
template LpBounds<double> solve_bounds(const LinearProgram<double>&);
template LpBounds<Rational> solve_bounds(const LinearProgram<Rational>&);
template LinearProgram<double> build_margin_program(const LatentStateSpace&,
                                                    const ObservedLaw<double>&,
                                                    const StateObjective&);
template LinearProgram<Rational> build_margin_program(const LatentStateSpace&,
                                                      const ObservedLaw<Rational>&,
                                                      const StateObjective&);
template LinearProgram<double> build_gate_program(const ObservedLaw<double>&, const AssumptionSet&);
template LinearProgram<Rational> build_gate_program(const ObservedLaw<Rational>&,
                                                    const AssumptionSet&);

}  // namespace partialid
