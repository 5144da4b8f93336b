#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <vector>

#include "reluforge/lp.hpp"

namespace reluforge::opt {

struct MilpProblem {
  LpProblem base;
  std::vector<std::size_t> binaries;

  void validate() const {
    base.validate();
    for (auto j : binaries) {
      if (j >= base.num_variables()) throw DimensionError("binary index out of range");
      if (base.lower[j] < 0.0 || base.upper[j] > 1.0)
        throw DimensionError("binary variable bounds must lie within [0, 1]");
    }
  }
};

struct MilpTarget {
  enum class Kind { optimal, first_feasible_above };
  Kind kind = Kind::optimal;
  double threshold = 0.0;

  static MilpTarget optimal() { return {}; }
  static MilpTarget first_feasible_above(double t) { return {Kind::first_feasible_above, t}; }
};

struct MilpConfig {
  double time_limit_s = kInf;
  double gap_tol = 1e-9;
  double integrality_tol = 1e-6;
  std::size_t node_limit = std::numeric_limits<std::size_t>::max();
  MilpTarget target;
  LpTolerances lp;
};

// What the lazy-cut hook decides about an integral solution. `cuts` are added
// to every node for the rest of the search; a rejected solution never becomes
// the incumbent, so it cannot prune the tree.
struct IncumbentDecision {
  std::vector<Constraint> cuts;
  bool accept = true;
  bool stop = false;
};

using LazyCutHook = std::function<IncumbentDecision(const std::vector<double>& assignment, double objective)>;

namespace detail {

struct BnbNode {
  std::vector<double> lo;  // bounds of the binaries, in `binaries` order
  std::vector<double> hi;
  double bound = kInf;  // parent's LP bound (maximization form)
  std::size_t id = 0;
};

struct NodeOrder {
  bool operator()(const BnbNode& a, const BnbNode& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.id < b.id;  // among equal bounds, newest (deepest) first
  }
};

}  // namespace detail

// Best-first branch and bound over the binaries, branching on the most
// fractional one. Every LP is solved from scratch on the node's bounds.
inline Solution solve_milp(const MilpProblem& problem, const MilpConfig& config = {},
                           const LazyCutHook& hook = {}) {
  problem.validate();
  const auto start = std::chrono::steady_clock::now();
  const bool maximize = problem.base.sense == Sense::maximize;

  // Internally everything maximizes.
  LpProblem work = problem.base;
  work.sense = Sense::maximize;
  if (!maximize)
    for (double& c : work.objective) c = -c;

  const auto& bins = problem.binaries;
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  Solution result;
  bool have_incumbent = false;
  double incumbent_value = -kInf;
  std::vector<double> incumbent;
  std::size_t nodes = 0, iterations = 0;

  auto finish = [&](SolveStatus status, double bound_max_form) {
    result.status = status;
    result.nodes = nodes;
    result.iterations = iterations;
    if (have_incumbent) {
      result.values = incumbent;
      result.objective = maximize ? incumbent_value : -incumbent_value;
    }
    result.bound = maximize ? bound_max_form : -bound_max_form;
    return result;
  };

  auto lp_at = [&](const std::vector<double>& lo, const std::vector<double>& hi) {
    for (std::size_t k = 0; k < bins.size(); ++k) {
      work.lower[bins[k]] = lo[k];
      work.upper[bins[k]] = hi[k];
    }
    Solution s = solve_lp(work, config.lp);
    iterations += s.iterations;
    return s;
  };

  auto prunable = [&](double bound) {
    return have_incumbent && bound <= incumbent_value + config.gap_tol * std::max(1.0, std::abs(incumbent_value));
  };

  std::priority_queue<detail::BnbNode, std::vector<detail::BnbNode>, detail::NodeOrder> open;
  {
    detail::BnbNode root;
    for (auto j : bins) {
      root.lo.push_back(std::max(0.0, problem.base.lower[j]));
      root.hi.push_back(std::min(1.0, problem.base.upper[j]));
    }
    open.push(std::move(root));
  }
  std::size_t next_id = 1;

  while (!open.empty()) {
    if (elapsed() > config.time_limit_s || nodes >= config.node_limit)
      return finish(SolveStatus::time_limit, std::max(incumbent_value, open.top().bound));
    detail::BnbNode node = open.top();
    open.pop();
    if (prunable(node.bound)) continue;

    while (true) {
      Solution lp = lp_at(node.lo, node.hi);
      ++nodes;
      if (lp.status == SolveStatus::infeasible) break;
      if (lp.status == SolveStatus::unbounded) {
        result.nodes = nodes;
        result.status = SolveStatus::unbounded;
        result.bound = maximize ? kInf : -kInf;
        return result;
      }
      const double bound = lp.objective;
      if (prunable(bound)) break;

      std::size_t branch = bins.size();
      double worst = 0.0;  // distance to the nearest integer
      double spread = 0.0;
      for (std::size_t k = 0; k < bins.size(); ++k) {
        const double v = lp.values[bins[k]];
        const double frac = std::abs(v - std::round(v));
        spread = std::max(spread, frac);
        if (frac > config.integrality_tol && frac > worst) {
          worst = frac;
          branch = k;
        }
      }

      if (branch == bins.size()) {
        // Integral within tolerance; snap the binaries and re-solve so the
        // reported assignment is exactly integral.
        Solution polished = lp;
        if (spread > 0.0) {
          std::vector<double> lo(bins.size()), hi(bins.size());
          for (std::size_t k = 0; k < bins.size(); ++k) lo[k] = hi[k] = std::round(lp.values[bins[k]]);
          polished = lp_at(lo, hi);
          if (polished.status != SolveStatus::optimal) {
            // Snapping broke feasibility: branch on the least integral binary.
            for (std::size_t k = 0; k < bins.size(); ++k) {
              const double frac = std::abs(lp.values[bins[k]] - std::round(lp.values[bins[k]]));
              if (frac == spread) branch = k;
            }
          }
        }
        if (branch == bins.size()) {
          IncumbentDecision decision;
          if (hook) decision = hook(polished.values, maximize ? polished.objective : -polished.objective);
          if (decision.accept && (!have_incumbent || polished.objective > incumbent_value)) {
            have_incumbent = true;
            incumbent_value = polished.objective;
            incumbent = polished.values;
          }
          if (decision.stop) {
            double b = incumbent_value;
            if (!open.empty()) b = std::max(b, open.top().bound);
            if (!decision.cuts.empty() || !decision.accept) b = std::max(b, bound);
            return finish(SolveStatus::time_limit, b);
          }
          if (decision.accept && config.target.kind == MilpTarget::Kind::first_feasible_above) {
            const double original = maximize ? polished.objective : -polished.objective;
            const bool above = maximize ? original > config.target.threshold : original < config.target.threshold;
            if (above) {
              double b = std::max(incumbent_value, bound);
              if (!open.empty()) b = std::max(b, open.top().bound);
              return finish(SolveStatus::feasible_found, b);
            }
          }
          if (decision.cuts.empty()) break;
          for (auto& c : decision.cuts) {
            c.coefficients.resize(work.num_variables(), 0.0);
            work.constraints.push_back(std::move(c));
          }
          continue;  // re-solve this node under the new cuts
        }
      }

      detail::BnbNode down = node, up = node;
      down.hi[branch] = 0.0;
      up.lo[branch] = 1.0;
      down.bound = up.bound = bound;
      down.id = next_id++;
      up.id = next_id++;
      open.push(std::move(down));
      open.push(std::move(up));
      break;
    }
  }

  if (!have_incumbent) return finish(SolveStatus::infeasible, -kInf);
  return finish(SolveStatus::optimal, incumbent_value);
}

}  // namespace reluforge::opt
