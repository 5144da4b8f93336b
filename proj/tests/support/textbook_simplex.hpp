#pragma once

// Reference solver for cross-checking the library LP. Deliberately naive: the
// problem is rewritten into standard form (min c'y, Ay = b, y >= 0, b >= 0) and
// solved with a full tableau, Bland's rule and artificial variables.

#include <cmath>
#include <optional>
#include <vector>

#include "reluforge/lp.hpp"

namespace testsupport {

struct TextbookResult {
  enum Kind { optimal, infeasible, unbounded } kind;
  double objective = 0.0;  // in the sense of the original problem
};

inline TextbookResult textbook_solve(const reluforge::opt::LpProblem& p) {
  using namespace reluforge::opt;
  const std::size_t n = p.num_variables();

  // x_j = shift_j + sum_k map[j][k] * y_k
  std::vector<double> shift(n, 0.0);
  std::vector<std::vector<std::pair<std::size_t, double>>> map(n);
  std::size_t ny = 0;
  std::vector<std::pair<std::size_t, double>> upper_rows;  // y_k <= rhs
  for (std::size_t j = 0; j < n; ++j) {
    const double lo = p.lower[j], hi = p.upper[j];
    if (std::isfinite(lo)) {
      shift[j] = lo;
      map[j] = {{ny++, 1.0}};
      if (std::isfinite(hi)) upper_rows.push_back({ny - 1, hi - lo});
    } else if (std::isfinite(hi)) {
      shift[j] = hi;
      map[j] = {{ny++, -1.0}};
    } else {
      map[j] = {{ny, 1.0}, {ny + 1, -1.0}};
      ny += 2;
    }
  }

  struct Row {
    std::vector<double> a;
    Relation rel;
    double b;
  };
  std::vector<Row> rows;
  for (const auto& c : p.constraints) {
    Row r{std::vector<double>(ny, 0.0), c.relation, c.rhs};
    for (std::size_t j = 0; j < n; ++j) {
      r.b -= c.coefficients[j] * shift[j];
      for (auto [k, s] : map[j]) r.a[k] += c.coefficients[j] * s;
    }
    rows.push_back(std::move(r));
  }
  for (auto [k, rhs] : upper_rows) {
    Row r{std::vector<double>(ny, 0.0), Relation::less_equal, rhs};
    r.a[k] = 1.0;
    rows.push_back(std::move(r));
  }

  // slacks
  const std::size_t m = rows.size();
  std::size_t ns = 0;
  for (const auto& r : rows) ns += r.rel != Relation::equal;
  const std::size_t nv = ny + ns + m;  // + artificials
  std::vector<std::vector<double>> T(m + 1, std::vector<double>(nv + 1, 0.0));
  std::vector<std::size_t> basis(m);
  std::size_t s = ny;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < ny; ++k) T[i][k] = rows[i].a[k];
    if (rows[i].rel == Relation::less_equal) T[i][s++] = 1.0;
    if (rows[i].rel == Relation::greater_equal) T[i][s++] = -1.0;
    T[i][nv] = rows[i].b;
    if (T[i][nv] < 0)
      for (auto& v : T[i]) v = -v;
    T[i][ny + ns + i] = 1.0;
    basis[i] = ny + ns + i;
  }

  auto run = [&](const std::vector<double>& cost, std::size_t allowed) -> bool {
    for (;;) {
      // objective row: reduced costs
      std::vector<double> d(cost);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < nv; ++k) d[k] -= cost[basis[i]] * T[i][k];
      std::size_t q = allowed;
      for (std::size_t k = 0; k < allowed; ++k)
        if (d[k] < -1e-10) {
          q = k;
          break;
        }
      if (q == allowed) return true;
      std::size_t r = m;
      double best = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (T[i][q] <= 1e-10) continue;
        const double ratio = T[i][nv] / T[i][q];
        if (r == m || ratio < best - 1e-12 || (ratio <= best + 1e-12 && basis[i] < basis[r])) {
          best = ratio;
          r = i;
        }
      }
      if (r == m) return false;
      const double piv = T[r][q];
      for (auto& v : T[r]) v /= piv;
      for (std::size_t i = 0; i < m; ++i) {
        if (i == r || T[i][q] == 0.0) continue;
        const double f = T[i][q];
        for (std::size_t k = 0; k <= nv; ++k) T[i][k] -= f * T[r][k];
      }
      basis[r] = q;
    }
  };

  std::vector<double> phase1(nv, 0.0);
  for (std::size_t i = 0; i < m; ++i) phase1[ny + ns + i] = 1.0;
  run(phase1, nv);
  double infeas = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] >= ny + ns) infeas += T[i][nv];
  if (infeas > 1e-7) return {TextbookResult::infeasible};
  // Drive remaining (zero-valued) artificials out of the basis where possible.
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < ny + ns) continue;
    for (std::size_t k = 0; k < ny + ns; ++k) {
      if (std::abs(T[i][k]) > 1e-9) {
        const double piv = T[i][k];
        for (auto& v : T[i]) v /= piv;
        for (std::size_t r = 0; r < m; ++r) {
          if (r == i || T[r][k] == 0.0) continue;
          const double f = T[r][k];
          for (std::size_t c = 0; c <= nv; ++c) T[r][c] -= f * T[i][c];
        }
        basis[i] = k;
        break;
      }
    }
  }

  const double sign = p.sense == Sense::maximize ? -1.0 : 1.0;
  std::vector<double> cost(nv, 0.0);
  double constant = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    constant += p.objective[j] * shift[j];
    for (auto [k, sc] : map[j]) cost[k] += sign * p.objective[j] * sc;
  }
  if (!run(cost, ny + ns)) return {TextbookResult::unbounded};
  double obj = 0.0;
  for (std::size_t i = 0; i < m; ++i) obj += cost[basis[i]] * T[i][nv];
  return {TextbookResult::optimal, sign * obj + constant};
}

}  // namespace testsupport
