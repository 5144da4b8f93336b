#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reluforge/errors.hpp"

namespace reluforge::opt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { maximize, minimize };
enum class Relation { less_equal, equal, greater_equal };

struct Constraint {
  std::vector<double> coefficients;
  Relation relation = Relation::less_equal;
  double rhs = 0.0;
};

using Term = std::pair<std::size_t, double>;

struct LpProblem {
  Sense sense = Sense::maximize;
  std::vector<double> objective;
  std::vector<Constraint> constraints;
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t num_variables() const { return objective.size(); }
  std::size_t num_constraints() const { return constraints.size(); }

  std::size_t add_variable(double lo, double hi, double cost = 0.0) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    for (auto& c : constraints) c.coefficients.push_back(0.0);
    return objective.size() - 1;
  }

  void add_constraint(std::vector<double> coefficients, Relation relation, double rhs) {
    coefficients.resize(num_variables(), 0.0);
    constraints.push_back({std::move(coefficients), relation, rhs});
  }

  void add_constraint(std::initializer_list<Term> terms, Relation relation, double rhs) {
    add_constraint(std::vector<Term>(terms), relation, rhs);
  }

  void add_constraint(const std::vector<Term>& terms, Relation relation, double rhs) {
    std::vector<double> row(num_variables(), 0.0);
    for (auto [j, a] : terms) row.at(j) += a;
    constraints.push_back({std::move(row), relation, rhs});
  }

  void validate() const {
    const std::size_t n = num_variables();
    if (lower.size() != n || upper.size() != n)
      throw DimensionError("variable bounds do not match the number of variables");
    for (std::size_t j = 0; j < n; ++j) {
      if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] == kInf || upper[j] == -kInf)
        throw NumericError("invalid bounds on variable " + std::to_string(j));
      if (!std::isfinite(objective[j])) throw NonFiniteError("non-finite objective coefficient");
    }
    for (const auto& c : constraints) {
      if (c.coefficients.size() != n) throw DimensionError("constraint length differs from variable count");
      if (!std::isfinite(c.rhs)) throw NonFiniteError("constraint right-hand side must be finite");
      for (double a : c.coefficients)
        if (!std::isfinite(a)) throw NonFiniteError("non-finite constraint coefficient");
    }
  }
};

enum class SolveStatus { optimal, infeasible, unbounded, feasible_found, time_limit };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::feasible_found: return "feasible-found";
    case SolveStatus::time_limit: return "time-limit";
  }
  return "unknown";
}

struct Solution {
  SolveStatus status = SolveStatus::infeasible;
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> values;
  // Best proven bound on the objective (an upper bound when maximizing).
  double bound = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
  std::size_t nodes = 0;

  bool has_assignment() const {
    return status == SolveStatus::optimal || status == SolveStatus::feasible_found ||
           (status == SolveStatus::time_limit && !values.empty());
  }
};

struct LpTolerances {
  double feasibility = 1e-7;
  double optimality = 1e-9;
  double pivot = 1e-9;       // smallest pivot accepted in the ratio test
  double zero_pivot = 1e-11;  // entries below this are treated as zero
};

// Largest violation of any constraint or variable bound by `x`.
inline double max_violation(const LpProblem& p, const std::vector<double>& x) {
  double worst = 0.0;
  for (std::size_t j = 0; j < p.num_variables(); ++j) {
    worst = std::max(worst, p.lower[j] - x[j]);
    worst = std::max(worst, x[j] - p.upper[j]);
  }
  for (const auto& c : p.constraints) {
    double a = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) a += c.coefficients[j] * x[j];
    switch (c.relation) {
      case Relation::less_equal: worst = std::max(worst, a - c.rhs); break;
      case Relation::greater_equal: worst = std::max(worst, c.rhs - a); break;
      case Relation::equal: worst = std::max(worst, std::abs(a - c.rhs)); break;
    }
  }
  return worst;
}

namespace detail {

// Two-phase primal simplex on a dense tableau with implicit variable bounds.
// Columns are laid out as [structural | slack per row | artificial per row];
// artificial columns of the tableau carry B^-1 (up to row signs), which is
// used to recompute basic values and limit drift.
class BoundedSimplex {
 public:
  BoundedSimplex(const LpProblem& p, LpTolerances tol) : tol_(tol), n_(p.num_variables()), m_(p.num_constraints()) {
    cols_ = n_ + 2 * m_;
    lo_.assign(cols_, 0.0);
    hi_.assign(cols_, 0.0);
    x_.assign(cols_, 0.0);
    state_.assign(cols_, State::lower);
    a_.assign(m_ * (n_ + m_), 0.0);
    b_.resize(m_);
    for (std::size_t j = 0; j < n_; ++j) {
      lo_[j] = p.lower[j];
      hi_[j] = p.upper[j];
      if (lo_[j] > hi_[j]) bounds_conflict_ = true;
    }
    for (std::size_t i = 0; i < m_; ++i) {
      const auto& c = p.constraints[i];
      for (std::size_t j = 0; j < n_; ++j) a_[i * (n_ + m_) + j] = c.coefficients[j];
      a_[i * (n_ + m_) + n_ + i] = 1.0;
      b_[i] = c.rhs;
      const std::size_t s = n_ + i;
      switch (c.relation) {
        case Relation::less_equal: lo_[s] = 0.0; hi_[s] = kInf; break;
        case Relation::greater_equal: lo_[s] = -kInf; hi_[s] = 0.0; break;
        case Relation::equal: lo_[s] = 0.0; hi_[s] = 0.0; break;
      }
    }
    for (std::size_t i = 0; i < m_; ++i) {
      lo_[art(i)] = 0.0;
      hi_[art(i)] = kInf;
    }
  }

  Solution solve(const LpProblem& p) {
    Solution sol;
    if (bounds_conflict_) {
      sol.status = SolveStatus::infeasible;
      return sol;
    }
    initialize();

    std::vector<double> phase1(cols_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) phase1[art(i)] = 1.0;
    if (run(phase1) == Outcome::unbounded) throw NumericError("phase 1 reported unbounded");
    recompute_basics();
    double infeas = 0.0;
    for (std::size_t i = 0; i < m_; ++i) infeas = std::max(infeas, x_[art(i)]);
    sol.iterations = iterations_;
    if (infeas > tol_.feasibility) {
      sol.status = SolveStatus::infeasible;
      return sol;
    }

    for (std::size_t i = 0; i < m_; ++i) {
      hi_[art(i)] = 0.0;
      if (state_[art(i)] != State::basic) x_[art(i)] = 0.0;
    }
    std::vector<double> cost(cols_, 0.0);
    const double sign = p.sense == Sense::maximize ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n_; ++j) cost[j] = sign * p.objective[j];
    const Outcome outcome = run(cost);
    sol.iterations = iterations_;
    if (outcome == Outcome::unbounded) {
      sol.status = SolveStatus::unbounded;
      sol.bound = p.sense == Sense::maximize ? kInf : -kInf;
      return sol;
    }
    recompute_basics();
    sol.values.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
    for (std::size_t j = 0; j < n_; ++j) sol.values[j] = std::clamp(sol.values[j], lo_[j], hi_[j]);
    double obj = 0.0;
    for (std::size_t j = 0; j < n_; ++j) obj += p.objective[j] * sol.values[j];
    sol.status = SolveStatus::optimal;
    sol.objective = obj;
    sol.bound = obj;
    return sol;
  }

 private:
  enum class State : unsigned char { basic, lower, upper, free };
  enum class Outcome { optimal, unbounded };

  std::size_t art(std::size_t i) const { return n_ + m_ + i; }
  double& t(std::size_t i, std::size_t j) { return tab_[i * cols_ + j]; }
  double a(std::size_t i, std::size_t j) const {
    return j < n_ + m_ ? a_[i * (n_ + m_) + j] : (j - n_ - m_ == i ? sign_[i] : 0.0);
  }

  void initialize() {
    for (std::size_t j = 0; j < n_ + m_; ++j) {
      if (std::isfinite(lo_[j])) {
        x_[j] = lo_[j];
        state_[j] = State::lower;
      } else if (std::isfinite(hi_[j])) {
        x_[j] = hi_[j];
        state_[j] = State::upper;
      } else {
        x_[j] = 0.0;
        state_[j] = State::free;
      }
    }
    sign_.assign(m_, 1.0);
    tab_.assign(m_ * cols_, 0.0);
    basis_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      double r = b_[i];
      for (std::size_t j = 0; j < n_ + m_; ++j) r -= a_[i * (n_ + m_) + j] * x_[j];
      sign_[i] = r >= 0.0 ? 1.0 : -1.0;
      for (std::size_t j = 0; j < n_ + m_; ++j) t(i, j) = sign_[i] * a_[i * (n_ + m_) + j];
      t(i, art(i)) = 1.0;
      basis_[i] = art(i);
      state_[art(i)] = State::basic;
      x_[art(i)] = std::abs(r);
    }
  }

  // x_B = B^-1 (b - N x_N), with B^-1(i, r) = T(i, art_r) * sign_r.
  void recompute_basics() {
    std::vector<double> resid(b_);
    for (std::size_t j = 0; j < cols_; ++j) {
      if (state_[j] == State::basic || x_[j] == 0.0) continue;
      for (std::size_t i = 0; i < m_; ++i) resid[i] -= a(i, j) * x_[j];
    }
    for (std::size_t i = 0; i < m_; ++i) {
      double v = 0.0;
      for (std::size_t r = 0; r < m_; ++r) v += t(i, art(r)) * sign_[r] * resid[r];
      x_[basis_[i]] = v;
    }
  }

  Outcome run(const std::vector<double>& cost) {
    const std::size_t max_iter = 20000 + 50 * (cols_ + m_);
    std::vector<double> d(cols_);
    std::size_t degenerate = 0;
    bool bland = false;
    std::size_t since_refresh = 0;
    for (std::size_t iter = 0;; ++iter) {
      if (iter > max_iter) throw NumericError("simplex iteration limit exceeded");

      // reduced costs
      for (std::size_t j = 0; j < cols_; ++j) d[j] = cost[j];
      for (std::size_t i = 0; i < m_; ++i) {
        const double cb = cost[basis_[i]];
        if (cb == 0.0) continue;
        const double* row = &tab_[i * cols_];
        for (std::size_t j = 0; j < cols_; ++j) d[j] -= cb * row[j];
      }

      std::size_t enter = cols_;
      double dir = 0.0;
      double best = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) {
        const State s = state_[j];
        if (s == State::basic || lo_[j] == hi_[j]) continue;
        double score = 0.0, move = 0.0;
        if ((s == State::lower || s == State::free) && d[j] < -tol_.optimality) {
          score = -d[j];
          move = 1.0;
        } else if ((s == State::upper || s == State::free) && d[j] > tol_.optimality) {
          score = d[j];
          move = -1.0;
        } else {
          continue;
        }
        if (bland) {
          enter = j;
          dir = move;
          break;
        }
        if (score > best) {
          best = score;
          enter = j;
          dir = move;
        }
      }
      if (enter == cols_) return Outcome::optimal;

      double theta = kInf;
      std::size_t leave = m_;  // m_ means bound flip of the entering variable
      bool leave_to_upper = false;
      bool tiny_seen = false;
      if (std::isfinite(lo_[enter]) && std::isfinite(hi_[enter])) theta = hi_[enter] - lo_[enter];
      for (std::size_t i = 0; i < m_; ++i) {
        const double coef = t(i, enter);
        if (std::abs(coef) <= tol_.zero_pivot) continue;
        const double rate = -dir * coef;
        const std::size_t bv = basis_[i];
        double ratio;
        bool to_upper;
        if (rate < 0.0) {
          if (!std::isfinite(lo_[bv])) continue;
          ratio = (x_[bv] - lo_[bv]) / -rate;
          to_upper = false;
        } else {
          if (!std::isfinite(hi_[bv])) continue;
          ratio = (hi_[bv] - x_[bv]) / rate;
          to_upper = true;
        }
        if (std::abs(coef) < tol_.pivot) {
          tiny_seen = true;
          continue;
        }
        ratio = std::max(ratio, 0.0);
        bool take = false;
        if (theta == kInf) {
          take = true;
        } else {
          const double tie = 1e-12 * (1.0 + theta);
          if (ratio < theta - tie) {
            take = true;
          } else if (ratio <= theta + tie && leave != m_) {
            take = bland ? basis_[i] < basis_[leave] : std::abs(coef) > std::abs(t(leave, enter));
          }
        }
        if (take) {
          theta = ratio;
          leave = i;
          leave_to_upper = to_upper;
        }
      }
      if (theta == kInf) {
        if (tiny_seen) throw NumericError("only pivots below threshold are available");
        return Outcome::unbounded;
      }

      ++iterations_;
      if (theta <= 1e-12) {
        if (++degenerate > 25) bland = true;
      } else {
        degenerate = 0;
        bland = false;
      }

      x_[enter] += dir * theta;
      for (std::size_t i = 0; i < m_; ++i) {
        const double coef = t(i, enter);
        if (coef != 0.0) x_[basis_[i]] -= dir * theta * coef;
      }

      if (leave == m_) {
        state_[enter] = dir > 0 ? State::upper : State::lower;
        x_[enter] = dir > 0 ? hi_[enter] : lo_[enter];
        continue;
      }

      const std::size_t out = basis_[leave];
      x_[out] = leave_to_upper ? hi_[out] : lo_[out];
      state_[out] = leave_to_upper ? State::upper : State::lower;
      pivot(leave, enter);
      basis_[leave] = enter;
      state_[enter] = State::basic;

      if (++since_refresh >= 64) {
        recompute_basics();
        since_refresh = 0;
      }
    }
  }

  void pivot(std::size_t r, std::size_t q) {
    double* prow = &tab_[r * cols_];
    const double inv = 1.0 / prow[q];
    for (std::size_t j = 0; j < cols_; ++j) prow[j] *= inv;
    prow[q] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* row = &tab_[i * cols_];
      const double f = row[q];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols_; ++j) row[j] -= f * prow[j];
      row[q] = 0.0;
    }
  }

  LpTolerances tol_;
  std::size_t n_, m_, cols_ = 0;
  std::vector<double> a_;  // original [A | I], row-major
  std::vector<double> b_;
  std::vector<double> sign_;
  std::vector<double> tab_;
  std::vector<double> lo_, hi_, x_;
  std::vector<State> state_;
  std::vector<std::size_t> basis_;
  std::size_t iterations_ = 0;
  bool bounds_conflict_ = false;
};

}  // namespace detail

namespace detail {

inline Solution solve_dense(const LpProblem& p, LpTolerances tol) {
  BoundedSimplex simplex(p, tol);
  Solution s = simplex.solve(p);
  s.nodes = 1;
  return s;
}

}  // namespace detail

// Presolve: fixed columns are substituted out, rows the bounds alone satisfy
// are dropped, and columns left in no row go to their best bound.
inline Solution solve_lp(const LpProblem& p, LpTolerances tol = {}) {
  p.validate();
  const std::size_t n = p.num_variables();
  Solution bad;
  bad.status = SolveStatus::infeasible;
  bad.nodes = 1;
  for (std::size_t j = 0; j < n; ++j)
    if (p.lower[j] > p.upper[j]) return bad;

  std::vector<char> fixed(n, 0), used(n, 0);
  for (std::size_t j = 0; j < n; ++j) fixed[j] = p.lower[j] == p.upper[j];
  std::vector<std::size_t> rows;
  std::vector<double> rhs(p.num_constraints());
  for (std::size_t i = 0; i < p.num_constraints(); ++i) {
    const auto& c = p.constraints[i];
    double shift = 0.0, sup = 0.0, inf = 0.0;
    bool free_terms = false;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = c.coefficients[j];
      if (a == 0.0) continue;
      if (fixed[j]) {
        shift += a * p.lower[j];
        continue;
      }
      free_terms = true;
      sup += a > 0.0 ? a * p.upper[j] : a * p.lower[j];
      inf += a > 0.0 ? a * p.lower[j] : a * p.upper[j];
    }
    rhs[i] = c.rhs - shift;
    if (!free_terms) {
      const double slack = tol.feasibility * (1.0 + std::abs(c.rhs));
      const bool ok = c.relation == Relation::less_equal      ? rhs[i] >= -slack
                      : c.relation == Relation::greater_equal ? rhs[i] <= slack
                                                              : std::abs(rhs[i]) <= slack;
      if (!ok) return bad;
      continue;
    }
    if (c.relation == Relation::less_equal && sup <= rhs[i]) continue;
    if (c.relation == Relation::greater_equal && inf >= rhs[i]) continue;
    rows.push_back(i);
    for (std::size_t j = 0; j < n; ++j)
      if (!fixed[j] && c.coefficients[j] != 0.0) used[j] = 1;
  }
  if (rows.size() == p.num_constraints() && std::count(used.begin(), used.end(), 1) == static_cast<long>(n))
    return detail::solve_dense(p, tol);

  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < n; ++j)
    if (used[j]) keep.push_back(j);
  LpProblem r;
  r.sense = p.sense;
  for (auto j : keep) r.add_variable(p.lower[j], p.upper[j], p.objective[j]);
  for (auto i : rows) {
    std::vector<double> row;
    row.reserve(keep.size());
    for (auto j : keep) row.push_back(p.constraints[i].coefficients[j]);
    r.add_constraint(std::move(row), p.constraints[i].relation, rhs[i]);
  }
  Solution s;
  if (keep.empty()) {
    s.status = SolveStatus::optimal;
    s.objective = 0.0;
    s.nodes = 1;
  } else {
    s = detail::solve_dense(r, tol);
    if (s.status != SolveStatus::optimal) return s;
  }

  const double sign = p.sense == Sense::maximize ? 1.0 : -1.0;
  std::vector<double> values(n, 0.0);
  for (std::size_t k = 0; k < keep.size(); ++k) values[keep[k]] = s.values[k];
  double extra = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (used[j]) continue;
    const double gain = sign * p.objective[j];
    double v;
    if (fixed[j]) {
      v = p.lower[j];
    } else if (gain > 0.0) {
      v = p.upper[j];
    } else if (gain < 0.0) {
      v = p.lower[j];
    } else {
      v = std::isfinite(p.lower[j]) ? p.lower[j] : (std::isfinite(p.upper[j]) ? p.upper[j] : 0.0);
    }
    if (!std::isfinite(v)) {
      s.status = SolveStatus::unbounded;
      s.values.clear();
      s.bound = p.sense == Sense::maximize ? kInf : -kInf;
      return s;
    }
    values[j] = v;
    extra += p.objective[j] * v;
  }
  s.values = std::move(values);
  s.objective += extra;
  s.bound = s.objective;
  return s;
}

}  // namespace reluforge::opt
