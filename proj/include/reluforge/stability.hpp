#pragma once

#include <chrono>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reluforge/milp.hpp"
#include "reluforge/network.hpp"
#include "reluforge/parallel.hpp"

namespace reluforge {

enum class Provenance { exact, feasibility, relaxed };
enum class BoundMode { exact, feasibility_first, relaxed_only };
enum class StabilityClass { stably_active, stably_inactive, unstable };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::exact: return "exact";
    case Provenance::feasibility: return "feasibility";
    case Provenance::relaxed: return "relaxed";
  }
  return "?";
}

inline std::string_view to_string(BoundMode m) {
  switch (m) {
    case BoundMode::exact: return "exact";
    case BoundMode::feasibility_first: return "feasibility-first";
    case BoundMode::relaxed_only: return "relaxed-only";
  }
  return "?";
}

inline std::string_view to_string(StabilityClass c) {
  switch (c) {
    case StabilityClass::stably_active: return "stably-active";
    case StabilityClass::stably_inactive: return "stably-inactive";
    case StabilityClass::unstable: return "unstable";
  }
  return "?";
}

inline BoundMode parse_bound_mode(std::string_view s) {
  if (s == "exact") return BoundMode::exact;
  if (s == "feasibility-first") return BoundMode::feasibility_first;
  if (s == "relaxed-only") return BoundMode::relaxed_only;
  throw ParseError("unknown bound mode '" + std::string(s) + "'");
}

// H bounds the pre-activation g from above over the domain, H_bar bounds -g.
// Provenance is the weaker of the two solves.
struct UnitBounds {
  double H = 0.0;
  double H_bar = 0.0;
  Provenance provenance = Provenance::exact;
  double solve_ms = 0.0;
  std::size_t nodes = 0;
};

inline StabilityClass classify(const UnitBounds& b, double tol = 0.0) {
  if (b.H <= tol) return StabilityClass::stably_inactive;
  if (b.H_bar <= tol) return StabilityClass::stably_active;
  return StabilityClass::unstable;
}

// Bounds of the hidden layers computed so far, indexed [layer][unit].
using BoundsTable = std::vector<std::vector<UnitBounds>>;

struct LinearExpr {
  std::vector<opt::Term> terms;
  double constant = 0.0;
};

struct UnitVars {
  static constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::size_t g = none;
  std::size_t h = none;  // none when the unit is stably inactive (h = 0)
  std::size_t h_bar = none;
  std::size_t z = none;  // none when the unit is stable
};

// MILP over the input and the first `units.size()` hidden layers.
struct NetworkEncoding {
  opt::MilpProblem milp;
  std::vector<std::size_t> x;
  std::vector<std::vector<UnitVars>> units;

  // Pre-activation of unit `i` in the layer right after the encoded ones.
  LinearExpr next_preactivation(const Network& net, std::size_t i) const {
    const std::size_t l = units.size();
    const Layer& layer = net.layer(l);
    LinearExpr e;
    e.constant = layer.bias[i];
    for (std::size_t c = 0; c < layer.fan_in(); ++c) {
      const double w = layer.weights(i, c);
      if (w == 0.0) continue;
      const std::size_t v = l == 0 ? x[c] : units[l - 1][c].h;
      if (v != UnitVars::none) e.terms.push_back({v, w});
    }
    return e;
  }
};

inline constexpr double kMinBigM = 1e-6;

// Encodes the first `layers` hidden layers using `bounds` as big-M constants.
// Units proven stable get no binary: inactive ones drop out, active ones are
// linear.
inline NetworkEncoding encode_network(const Network& net, const BoxDomain& domain, const BoundsTable& bounds,
                                      std::size_t layers) {
  if (domain.dim() != net.input_dim()) throw DimensionError("domain dimension mismatch");
  if (layers > net.num_hidden_layers()) throw DimensionError("cannot encode the output layer");
  if (bounds.size() < layers) throw InconsistentInputError("missing bounds for a prior layer");
  NetworkEncoding enc;
  auto& p = enc.milp.base;
  for (std::size_t i = 0; i < domain.dim(); ++i) enc.x.push_back(p.add_variable(domain.lower()[i], domain.upper()[i]));
  for (std::size_t l = 0; l < layers; ++l) {
    if (bounds[l].size() != net.layer(l).width()) throw InconsistentInputError("bounds table has the wrong width");
    std::vector<UnitVars> vars(net.layer(l).width());
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const UnitBounds& b = bounds[l][i];
      UnitVars& v = vars[i];
      if (b.H <= 0.0) continue;
      LinearExpr g = enc.next_preactivation(net, i);
      if (b.H_bar <= 0.0) {
        v.h = p.add_variable(std::max(0.0, -b.H_bar), b.H);
        g.terms.push_back({v.h, -1.0});
        p.add_constraint(g.terms, opt::Relation::equal, -g.constant);
        continue;
      }
      const double big = std::max(b.H, kMinBigM);
      const double big_bar = std::max(b.H_bar, kMinBigM);
      v.g = p.add_variable(-big_bar, big);
      v.h = p.add_variable(0.0, big);
      v.h_bar = p.add_variable(0.0, big_bar);
      v.z = p.add_variable(0.0, 1.0);
      enc.milp.binaries.push_back(v.z);
      g.terms.push_back({v.g, -1.0});
      p.add_constraint(g.terms, opt::Relation::equal, -g.constant);
      p.add_constraint({{v.g, 1.0}, {v.h, -1.0}, {v.h_bar, 1.0}}, opt::Relation::equal, 0.0);
      p.add_constraint({{v.h, 1.0}, {v.z, -big}}, opt::Relation::less_equal, 0.0);
      p.add_constraint({{v.h_bar, 1.0}, {v.z, big_bar}}, opt::Relation::less_equal, big_bar);
    }
    enc.units.push_back(std::move(vars));
  }
  return enc;
}

struct UnitProblem {
  NetworkEncoding encoding;
  LinearExpr target;  // g of the requested unit
};

inline UnitProblem encode_unit_constraints(const Network& net, const BoxDomain& domain, const BoundsTable& bounds,
                                           std::size_t layer, std::size_t unit) {
  if (layer >= net.num_hidden_layers() || unit >= net.layer(layer).width())
    throw DimensionError("unit index out of range");
  UnitProblem up{encode_network(net, domain, bounds, layer), {}};
  up.target = up.encoding.next_preactivation(net, unit);
  return up;
}

struct BoundOptions {
  BoundMode mode = BoundMode::exact;
  double time_limit_s = opt::kInf;  // per solve
  double threshold = 0.0;           // feasibility-first: stop once g > threshold is witnessed
};

namespace detail {

struct DirectionalBound {
  double value;
  Provenance provenance;
  std::size_t nodes;
};

// max sign * g over the encoding
inline DirectionalBound maximize_expr(opt::MilpProblem milp, const LinearExpr& expr, double sign,
                                      const BoundOptions& opts) {
  auto& p = milp.base;
  std::fill(p.objective.begin(), p.objective.end(), 0.0);
  for (auto [j, a] : expr.terms) p.objective[j] += sign * a;
  p.sense = opt::Sense::maximize;
  const double offset = sign * expr.constant;

  auto relaxed = [&] {
    opt::Solution s = opt::solve_lp(p);
    if (s.status != opt::SolveStatus::optimal)
      throw NumericError(std::string("bound relaxation ended with status ") + std::string(opt::to_string(s.status)));
    return s.objective + offset;
  };

  if (opts.mode == BoundMode::relaxed_only || milp.binaries.empty()) {
    const double v = relaxed();
    return {v, opts.mode == BoundMode::relaxed_only ? Provenance::relaxed : Provenance::exact, 1};
  }

  opt::MilpConfig cfg;
  cfg.time_limit_s = opts.time_limit_s;
  if (opts.mode == BoundMode::feasibility_first)
    cfg.target = opt::MilpTarget::first_feasible_above(opts.threshold - offset);
  opt::Solution s = opt::solve_milp(milp, cfg);
  switch (s.status) {
    case opt::SolveStatus::optimal: return {s.objective + offset, Provenance::exact, s.nodes};
    case opt::SolveStatus::feasible_found: return {relaxed(), Provenance::feasibility, s.nodes};
    case opt::SolveStatus::time_limit:
      return {std::isfinite(s.bound) ? s.bound + offset : relaxed(), Provenance::relaxed, s.nodes};
    default:
      throw NumericError(std::string("unit bound solve ended with status ") + std::string(opt::to_string(s.status)));
  }
}

}  // namespace detail

inline UnitBounds unit_bounds(const UnitProblem& up, const BoundOptions& opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  // In feasibility-first mode the threshold applies to both g and -g.
  auto hi = detail::maximize_expr(up.encoding.milp, up.target, 1.0, opts);
  auto lo = detail::maximize_expr(up.encoding.milp, up.target, -1.0, opts);
  UnitBounds b;
  b.H = hi.value;
  b.H_bar = lo.value;
  b.provenance = std::max(hi.provenance, lo.provenance);
  b.nodes = hi.nodes + lo.nodes;
  b.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return b;
}

inline UnitBounds unit_bounds(const Network& net, const BoxDomain& domain, const BoundsTable& bounds,
                              std::size_t layer, std::size_t unit, const BoundOptions& opts = {}) {
  return unit_bounds(encode_unit_constraints(net, domain, bounds, layer, unit), opts);
}

struct UnitRecord {
  std::size_t layer = 0;  // 0-based; serialized 1-based
  std::size_t index = 0;
  UnitBounds bounds;
  StabilityClass cls = StabilityClass::unstable;
};

struct StabilityReport {
  std::string network_fingerprint;
  std::string domain_fingerprint;
  BoundMode mode = BoundMode::exact;
  double stability_tol = 0.0;
  std::vector<std::vector<UnitRecord>> layers;
  double total_ms = 0.0;
  std::size_t total_nodes = 0;

  const UnitRecord& unit(std::size_t l, std::size_t i) const { return layers.at(l).at(i); }
  StabilityClass cls(std::size_t l, std::size_t i) const { return unit(l, i).cls; }

  BoundsTable bounds() const {
    BoundsTable t;
    for (const auto& layer : layers) {
      t.emplace_back();
      for (const auto& u : layer) t.back().push_back(u.bounds);
    }
    return t;
  }

  std::size_t count(StabilityClass c) const {
    std::size_t n = 0;
    for (const auto& layer : layers)
      for (const auto& u : layer) n += u.cls == c;
    return n;
  }

  std::size_t count(std::size_t l, StabilityClass c) const {
    std::size_t n = 0;
    for (const auto& u : layers.at(l)) n += u.cls == c;
    return n;
  }

  bool matches(const Network& net, const BoxDomain& domain) const {
    return network_fingerprint == fingerprint(net) && domain_fingerprint == fingerprint(domain);
  }
};

struct ClassifyOptions {
  BoundOptions bounds;
  double stability_tol = 0.0;
};

// Layer by layer: the bounds of layer l become the big-M constants of every
// solve in layer l + 1. Units within a layer are solved in parallel.
inline StabilityReport classify_units(const Network& net, const BoxDomain& domain, const ClassifyOptions& opts = {}) {
  const auto start = std::chrono::steady_clock::now();
  StabilityReport report;
  report.network_fingerprint = fingerprint(net);
  report.domain_fingerprint = fingerprint(domain);
  report.mode = opts.bounds.mode;
  report.stability_tol = opts.stability_tol;
  BoundsTable table;
  for (std::size_t l = 0; l < net.num_hidden_layers(); ++l) {
    const NetworkEncoding enc = encode_network(net, domain, table, l);
    std::vector<UnitRecord> records(net.layer(l).width());
    parallel_for(records.size(), [&](std::size_t i) {
      UnitProblem up{enc, enc.next_preactivation(net, i)};
      records[i].layer = l;
      records[i].index = i;
      records[i].bounds = unit_bounds(up, opts.bounds);
      records[i].cls = classify(records[i].bounds, opts.stability_tol);
    });
    table.emplace_back();
    for (const auto& r : records) {
      // Units classified stable only by a positive tolerance keep their true
      // bounds; the encoding itself decides from the signs.
      table.back().push_back(r.bounds);
      report.total_nodes += r.bounds.nodes;
    }
    report.layers.push_back(std::move(records));
  }
  report.total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline nlohmann::json report_to_json(const StabilityReport& r, bool timing = true) {
  nlohmann::json units = nlohmann::json::array();
  for (const auto& layer : r.layers)
    for (const auto& u : layer)
      units.push_back({{"layer", u.layer + 1},
                       {"index", u.index + 1},
                       {"H", u.bounds.H},
                       {"H_bar", u.bounds.H_bar},
                       {"class", to_string(u.cls)},
                       {"provenance", to_string(u.bounds.provenance)},
                       {"solve_ms", timing ? u.bounds.solve_ms : 0.0}});
  return {{"network_fingerprint", r.network_fingerprint},
          {"domain_fingerprint", r.domain_fingerprint},
          {"mode", to_string(r.mode)},
          {"stability_tol", r.stability_tol},
          {"units", units},
          {"stats", {{"nodes", r.total_nodes}}},
          {"timing", {{"total_ms", timing ? r.total_ms : 0.0}}}};
}

inline StabilityReport report_from_json(const nlohmann::json& j) {
  StabilityReport r;
  try {
    r.network_fingerprint = j.at("network_fingerprint").get<std::string>();
    r.domain_fingerprint = j.at("domain_fingerprint").get<std::string>();
    r.mode = parse_bound_mode(j.at("mode").get<std::string>());
    r.stability_tol = j.at("stability_tol").get<double>();
    for (const auto& u : j.at("units")) {
      UnitRecord rec;
      rec.layer = u.at("layer").get<std::size_t>() - 1;
      rec.index = u.at("index").get<std::size_t>() - 1;
      rec.bounds.H = u.at("H").get<double>();
      rec.bounds.H_bar = u.at("H_bar").get<double>();
      const auto prov = u.at("provenance").get<std::string>();
      rec.bounds.provenance = prov == "exact" ? Provenance::exact
                              : prov == "feasibility" ? Provenance::feasibility
                                                      : Provenance::relaxed;
      rec.bounds.solve_ms = u.value("solve_ms", 0.0);
      rec.cls = classify(rec.bounds, r.stability_tol);
      if (r.layers.size() <= rec.layer) r.layers.resize(rec.layer + 1);
      if (rec.index != r.layers[rec.layer].size()) throw ParseError("stability report units out of order");
      r.layers[rec.layer].push_back(rec);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed stability report: ") + e.what());
  }
  return r;
}

}  // namespace reluforge
