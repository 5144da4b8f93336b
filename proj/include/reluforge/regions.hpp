#pragma once

#include <chrono>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "reluforge/stability.hpp"

namespace reluforge {

struct PatternSet {
  std::set<ActivationPattern> patterns;
  bool complete = false;
  double seconds = 0.0;
  std::size_t incumbents = 0;
  std::size_t nodes = 0;

  std::size_t size() const { return patterns.size(); }
  bool contains(const ActivationPattern& p) const { return patterns.count(p) > 0; }
};

// Interior slack on the active side of a region polytope.
inline constexpr double kActiveSlack = 1e-9;

// The region of `pattern` as rows (a, b) meaning a.x <= b; active units need
// g >= slack, inactive units g <= 0. `pattern` may be a prefix.
inline std::vector<std::pair<Vector, double>> region_halfspaces(const Network& net, const ActivationPattern& pattern,
                                                                double slack = kActiveSlack) {
  std::vector<std::pair<Vector, double>> rows;
  if (pattern.num_layers() == 0) return rows;
  auto maps = preactivation_maps(net, pattern.prefix(pattern.num_layers() - 1));
  for (std::size_t l = 0; l < pattern.num_layers(); ++l) {
    const AffineMap& m = maps[l];
    for (std::size_t i = 0; i < pattern.width(l); ++i) {
      auto a = m.matrix.row(i);
      Vector row(a.begin(), a.end());
      if (pattern.active(l, i)) {
        for (double& v : row) v = -v;
        rows.push_back({std::move(row), m.offset[i] - slack});
      } else {
        rows.push_back({std::move(row), -m.offset[i]});
      }
    }
  }
  return rows;
}

inline opt::LpProblem region_lp(const Network& net, const BoxDomain& domain, const ActivationPattern& pattern,
                                double slack = kActiveSlack) {
  opt::LpProblem p;
  for (std::size_t i = 0; i < domain.dim(); ++i) p.add_variable(domain.lower()[i], domain.upper()[i]);
  for (auto& [a, b] : region_halfspaces(net, pattern, slack)) p.add_constraint(std::move(a), opt::Relation::less_equal, b);
  return p;
}

inline bool region_feasible(const Network& net, const BoxDomain& domain, const ActivationPattern& pattern) {
  return opt::solve_lp(region_lp(net, domain, pattern)).status == opt::SolveStatus::optimal;
}

struct InteriorPoint {
  Vector x;
  double radius = 0.0;  // Euclidean distance to the nearest facet, box faces included
};

// Chebyshev center of a region inside the domain; nullopt when the region
// has no interior.
inline std::optional<InteriorPoint> chebyshev_center(const Network& net, const BoxDomain& domain,
                                                     const ActivationPattern& pattern) {
  opt::LpProblem p;
  const std::size_t n = domain.dim();
  for (std::size_t i = 0; i < n; ++i) p.add_variable(domain.lower()[i], domain.upper()[i]);
  const std::size_t r = p.add_variable(0.0, opt::kInf, 1.0);
  p.sense = opt::Sense::maximize;
  auto rows = region_halfspaces(net, pattern, 0.0);
  std::vector<bool> strict;  // active rows need g > 0
  for (std::size_t l = 0; l < pattern.num_layers(); ++l)
    for (std::size_t i = 0; i < pattern.width(l); ++i) strict.push_back(pattern.active(l, i));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto& [a, b] = rows[k];
    const double len = norm_2(a);
    if (len == 0.0) {
      if (b < 0.0 || (b == 0.0 && strict[k])) return std::nullopt;
      continue;
    }
    a.push_back(len);
    p.add_constraint(std::move(a), opt::Relation::less_equal, b);
  }
  for (std::size_t i = 0; i < n; ++i) {
    p.add_constraint({{i, -1.0}, {r, 1.0}}, opt::Relation::less_equal, -domain.lower()[i]);
    p.add_constraint({{i, 1.0}, {r, 1.0}}, opt::Relation::less_equal, domain.upper()[i]);
  }
  opt::Solution s = opt::solve_lp(p);
  if (s.status != opt::SolveStatus::optimal || s.objective <= 1e-12) return std::nullopt;
  return InteriorPoint{Vector(s.values.begin(), s.values.begin() + static_cast<std::ptrdiff_t>(n)), s.objective};
}

// The one-tree model: the stability encoding of every hidden layer plus a
// variable f that must stay below the output h of every active unit.
struct EnumerationModel {
  NetworkEncoding encoding;
  std::size_t f = 0;
  std::vector<std::size_t> z;  // all binaries, in (layer, unit) order
  std::vector<std::size_t> widths;

  ActivationPattern decode(const std::vector<double>& values) const {
    std::vector<std::vector<bool>> bits;
    for (const auto& layer : encoding.units) {
      bits.emplace_back();
      for (const auto& u : layer) {
        if (u.z != UnitVars::none) {
          bits.back().push_back(values[u.z] > 0.5);
        } else {
          bits.back().push_back(u.h != UnitVars::none);
        }
      }
    }
    return ActivationPattern(std::move(bits));
  }

  // sum_{z=1} z - sum_{z=0} z <= N1 - 1
  opt::Constraint no_good(const ActivationPattern& p) const {
    opt::Constraint c;
    c.coefficients.assign(encoding.milp.base.num_variables(), 0.0);
    c.relation = opt::Relation::less_equal;
    double ones = 0.0;
    for (std::size_t l = 0; l < encoding.units.size(); ++l)
      for (std::size_t i = 0; i < encoding.units[l].size(); ++i) {
        const std::size_t zv = encoding.units[l][i].z;
        if (zv == UnitVars::none) continue;
        const bool on = p.active(l, i);
        c.coefficients[zv] = on ? 1.0 : -1.0;
        ones += on;
      }
    c.rhs = ones - 1.0;
    return c;
  }
};

inline EnumerationModel enumeration_model(const Network& net, const BoxDomain& domain, const StabilityReport& report,
                                          double cap = 1.0) {
  if (!report.matches(net, domain)) throw InconsistentInputError("stability report was computed for another network or domain");
  EnumerationModel m;
  m.encoding = encode_network(net, domain, report.bounds(), net.num_hidden_layers());
  m.widths = net.hidden_widths();
  auto& p = m.encoding.milp.base;
  m.f = p.add_variable(kActiveSlack, cap, 1.0);
  p.sense = opt::Sense::maximize;
  const BoundsTable bounds = report.bounds();
  for (std::size_t l = 0; l < m.encoding.units.size(); ++l)
    for (std::size_t i = 0; i < m.encoding.units[l].size(); ++i) {
      const UnitVars& u = m.encoding.units[l][i];
      if (u.h == UnitVars::none) continue;
      if (u.z == UnitVars::none) {
        p.add_constraint({{m.f, 1.0}, {u.h, -1.0}}, opt::Relation::less_equal, 0.0);
      } else {
        // Relaxed when z = 0; M must not cut f below its own cap there.
        const double big = std::max(bounds[l][i].H, cap);
        p.add_constraint({{m.f, 1.0}, {u.h, -1.0}, {u.z, big}}, opt::Relation::less_equal, big);
        m.z.push_back(u.z);
      }
    }
  return m;
}

struct EnumerationLimits {
  std::size_t max_patterns = std::numeric_limits<std::size_t>::max();
  double time_limit_s = opt::kInf;
};

// Every integral incumbent is recorded, then cut off with a no-good and never
// accepted, so the search runs until the tree is exhausted.
inline PatternSet enumerate_patterns(const Network& net, const BoxDomain& domain, const StabilityReport& report,
                                     const EnumerationLimits& limits = {}) {
  const auto start = std::chrono::steady_clock::now();
  EnumerationModel model = enumeration_model(net, domain, report);
  PatternSet result;
  auto hook = [&](const std::vector<double>& values, double) {
    ActivationPattern p = model.decode(values);
    ++result.incumbents;
    opt::IncumbentDecision d;
    d.accept = false;
    d.cuts.push_back(model.no_good(p));
    result.patterns.insert(std::move(p));
    d.stop = result.patterns.size() >= limits.max_patterns;
    return d;
  };
  opt::MilpConfig cfg;
  cfg.time_limit_s = limits.time_limit_s;
  opt::Solution s = opt::solve_milp(model.encoding.milp, cfg, hook);
  result.complete = s.status == opt::SolveStatus::infeasible || s.status == opt::SolveStatus::optimal;
  result.nodes = s.nodes;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// Grid oracle: distinct forward patterns on a regular grid with `resolution`
// points per axis. Never complete.
inline PatternSet brute_force_patterns(const Network& net, const BoxDomain& domain, std::size_t resolution) {
  if (domain.dim() > 3) throw DimensionError("grid enumeration supports at most 3 input dimensions");
  if (domain.dim() != net.input_dim()) throw DimensionError("domain dimension mismatch");
  if (resolution < 1) throw DimensionError("resolution must be positive");
  const auto start = std::chrono::steady_clock::now();
  PatternSet result;
  const std::size_t d = domain.dim();
  std::vector<std::size_t> idx(d, 0);
  Vector x(d);
  while (true) {
    for (std::size_t k = 0; k < d; ++k) {
      const double lo = domain.lower()[k], hi = domain.upper()[k];
      x[k] = resolution == 1 ? (lo + hi) / 2 : lo + (hi - lo) * static_cast<double>(idx[k]) / static_cast<double>(resolution - 1);
    }
    result.patterns.insert(forward(net, x).pattern);
    std::size_t k = 0;
    while (k < d && ++idx[k] == resolution) idx[k++] = 0;
    if (k == d) break;
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// Exact oracle: tests every candidate pattern's region polytope for LP
// feasibility. Candidates sharing an infeasible prefix are skipped together.
inline PatternSet exhaustive_lp_patterns(const Network& net, const BoxDomain& domain) {
  if (net.total_hidden_units() > 16) throw LimitError("exhaustive pattern search supports at most 16 hidden units");
  if (domain.dim() != net.input_dim()) throw DimensionError("domain dimension mismatch");
  const auto start = std::chrono::steady_clock::now();
  PatternSet result;
  const auto widths = net.hidden_widths();
  const std::size_t L = widths.size();

  opt::LpProblem base;
  for (std::size_t i = 0; i < domain.dim(); ++i) base.add_variable(domain.lower()[i], domain.upper()[i]);

  std::vector<std::vector<bool>> bits;
  std::vector<AffineMap> maps;
  auto recurse = [&](auto&& self, std::size_t layer, std::size_t unit, const opt::LpProblem& lp) -> void {
    if (layer == L) {
      result.patterns.insert(ActivationPattern(bits));
      return;
    }
    if (unit == 0) {
      maps = preactivation_maps(net, ActivationPattern(bits));
      bits.emplace_back();
    }
    const auto span = maps[layer].matrix.row(unit);
    const Vector row(span.begin(), span.end());
    const double c = maps[layer].offset[unit];
    for (bool on : {false, true}) {
      opt::LpProblem next = lp;
      Vector a = row;
      if (on) {
        for (double& v : a) v = -v;
        next.add_constraint(std::move(a), opt::Relation::less_equal, c - kActiveSlack);
      } else {
        next.add_constraint(std::move(a), opt::Relation::less_equal, -c);
      }
      if (opt::solve_lp(next).status != opt::SolveStatus::optimal) continue;
      bits.back().push_back(on);
      if (unit + 1 == widths[layer]) {
        self(self, layer + 1, 0, next);
      } else {
        self(self, layer, unit + 1, next);
      }
      bits.back().pop_back();
    }
    if (unit == 0) bits.pop_back();
  };
  recurse(recurse, 0, 0, base);
  result.complete = true;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// prefixes[l] holds the truncations (S_1..S_l); prefixes[0] is the empty prefix.
struct PrefixSets {
  std::vector<std::set<ActivationPattern>> prefixes;

  std::vector<std::size_t> counts() const {
    std::vector<std::size_t> c;
    for (const auto& s : prefixes) c.push_back(s.size());
    return c;
  }
};

inline PrefixSets prefix_sets(const PatternSet& ps) {
  if (ps.patterns.empty()) throw InconsistentInputError("prefix sets need at least one pattern");
  const std::size_t L = ps.patterns.begin()->num_layers();
  PrefixSets out;
  out.prefixes.resize(L + 1);
  for (const auto& p : ps.patterns)
    for (std::size_t l = 0; l <= L; ++l) out.prefixes[l].insert(p.prefix(l));
  return out;
}

// Maximum number of cells cut by n hyperplanes in general position in R^d.
inline std::uint64_t zaslavsky_bound(std::size_t n, std::size_t d) {
  std::uint64_t total = 0, binom = 1;
  for (std::size_t s = 0; s <= std::min(n, d); ++s) {
    total += binom;
    binom = binom * (n - s) / (s + 1);
  }
  return total;
}

inline void write_patterns(std::ostream& out, const PatternSet& ps) {
  for (const auto& p : ps.patterns) out << nlohmann::json(p.to_string()).dump() << '\n';
}

inline PatternSet read_patterns(std::istream& in, bool complete = false) {
  PatternSet ps;
  ps.complete = complete;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      ps.patterns.insert(ActivationPattern::from_string(nlohmann::json::parse(line).get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("pattern file line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return ps;
}

}  // namespace reluforge
